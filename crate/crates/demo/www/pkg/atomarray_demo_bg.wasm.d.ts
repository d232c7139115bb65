/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const array_spectrum: (a: number, b: number, c: number, d: number, e: bigint, f: number) => [number, number, number, number];
export const interface_memory: (a: number, b: number) => [number, number, number, number];
export const layer_stack: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
