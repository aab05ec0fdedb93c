/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_drive_free: (a: number, b: number) => void;
export const drive_advance: (a: number, b: number) => [number, number];
export const drive_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const drive_track: (a: number) => [number, number];
export const perSampling: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const rewardCurves: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
