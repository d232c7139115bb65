/* tslint:disable */
/* eslint-disable */

/**
 * Reflection spectrum of an `n_side²` array with waist `waist_over_side·L`
 * and Gaussian position disorder of spread `sigma` (wavelengths).
 */
export function array_spectrum(a: number, n_side: number, waist_over_side: number, sigma: number, seed: bigint, steps: number): string;

/**
 * Optimal storage and time-reversed retrieval in the single-mode interface
 * model with cooperativity `c`. Traces are magnitudes, decimated to ~400 points.
 */
export function interface_memory(c: number, area: number): string;

/**
 * Reflection of `layers` phase-matched lattices spaced `a_z` apart, each
 * with extra loss `loss_over_rate·Γ₀`.
 */
export function layer_stack(a: number, layers: number, a_z: number, loss_over_rate: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly array_spectrum: (a: number, b: number, c: number, d: number, e: bigint, f: number) => [number, number, number, number];
    readonly interface_memory: (a: number, b: number) => [number, number, number, number];
    readonly layer_stack: (a: number, b: number, c: number, d: number) => [number, number, number, number];
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
