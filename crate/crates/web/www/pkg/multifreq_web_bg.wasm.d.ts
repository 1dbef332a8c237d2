/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const analyticSecondTone: (a: number, b: number) => [number, number, number, number];
export const dressedLevels: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const modelSummary: (a: number) => [number, number, number, number];
export const spin1Beating: (a: number, b: number, c: number) => [number, number, number, number];
export const twoToneRun: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
