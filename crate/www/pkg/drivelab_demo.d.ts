/* tslint:disable */
/* eslint-disable */

export class Drive {
    free(): void;
    [Symbol.dispose](): void;
    advance(ticks: number): string;
    constructor(scenario: string, seed: number, target_speed: number);
    track(): string;
}

export function perSampling(priorities: Float64Array, lambda: number, mu: number, batches: number, seed: number): string;

export function rewardCurves(variable: string, speed: number, steer: number, cross: number, points: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_drive_free: (a: number, b: number) => void;
    readonly drive_advance: (a: number, b: number) => [number, number];
    readonly drive_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly drive_track: (a: number) => [number, number];
    readonly perSampling: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly rewardCurves: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
