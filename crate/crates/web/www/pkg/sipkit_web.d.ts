/* tslint:disable */
/* eslint-disable */

export function ansatzLevel(x_l: number): number;

export function bandConditional(x_l: number, segments: number): Float64Array;

/**
 * Coefficient of variation of the Beta/uniform conditional ratio along `x_l`.
 */
export function betaRatioCv(nu1: number, nu2: number, tau1: number, tau2: number, x_l: number): number;

export function boxProbability(x0: number, x1: number, y0: number, y1: number): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly ansatzLevel: (a: number) => [number, number, number];
    readonly bandConditional: (a: number, b: number) => [number, number, number, number];
    readonly betaRatioCv: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly boxProbability: (a: number, b: number, c: number, d: number) => [number, number, number];
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
