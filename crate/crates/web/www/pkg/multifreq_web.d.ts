/* tslint:disable */
/* eslint-disable */

export function analyticSecondTone(ns: number, rabi1_mhz: number): Float64Array;

export function dressedLevels(ns: number, rabi_mhz: number, f_lo_ghz: number, f_hi_ghz: number, points: number, cutoff: number): Float64Array;

export function modelSummary(ns: number): Float64Array;

export function spin1Beating(ns: number, rabi_mhz: number, points: number): Float64Array;

export function twoToneRun(ns: number, rabi1_mhz: number, rabi2_mhz: number, phase_rad: number, samples: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly analyticSecondTone: (a: number, b: number) => [number, number, number, number];
    readonly dressedLevels: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly modelSummary: (a: number) => [number, number, number, number];
    readonly spin1Beating: (a: number, b: number, c: number) => [number, number, number, number];
    readonly twoToneRun: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
