/* tslint:disable */
/* eslint-disable */

/**
 * A field on a Cartesian grid, with the node labels
 * (0 exterior, 1 interior, 2 collar, 3 continuation strip).
 */
export class Heatmap {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    labels(): Uint8Array;
    /**
     * Row-major values, index `j * nx + i`.
     */
    values(): Float64Array;
    readonly iterations: number;
    /**
     * Continuation `L²` error, or the largest jump / error of a solve.
     */
    readonly metric: number;
    readonly nx: number;
    readonly ny: number;
}

export function fcExtend(curve: string, _function: string, h: number): Heatmap;

export function multiplierCurve(delta: number, beta: number, nu_max: number, n: number): Float64Array;

export function poissonSolve(_case: string, beta: number, h: number): Heatmap;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_heatmap_free: (a: number, b: number) => void;
    readonly fcExtend: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly heatmap_iterations: (a: number) => number;
    readonly heatmap_labels: (a: number) => [number, number];
    readonly heatmap_metric: (a: number) => number;
    readonly heatmap_nx: (a: number) => number;
    readonly heatmap_ny: (a: number) => number;
    readonly heatmap_values: (a: number) => [number, number];
    readonly multiplierCurve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly poissonSolve: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
