/* tslint:disable */
/* eslint-disable */

/**
 * Certified enclosure of the ERM revenue for a piecewise-linear curve.
 */
export function enclosure(knots: Float64Array, values: Float64Array, tol: number): string;

/**
 * Seeded Monte Carlo estimate of the same quantity.
 */
export function monte_carlo(knots: Float64Array, values: Float64Array, samples: number, seed: number): string;

/**
 * Least concave curve through `(0,0)`, `(q_opt,1)`, `(q2,r2)`, `(1,r3)`
 * together with its revenue enclosure.
 */
export function three_piece(q_opt: number, q2: number, r2: number, r3: number, tol: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly enclosure: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly monte_carlo: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly three_piece: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
