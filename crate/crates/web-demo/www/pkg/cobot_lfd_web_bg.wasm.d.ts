/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_dmpdemo_free: (a: number, b: number) => void;
export const detection_sweep: (a: number, b: number, c: number, d: number) => [number, number];
export const dmpdemo_new: () => [number, number, number];
export const dmpdemo_retarget: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const teach_compare: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
