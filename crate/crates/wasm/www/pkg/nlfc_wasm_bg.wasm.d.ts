/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_heatmap_free: (a: number, b: number) => void;
export const fcExtend: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const heatmap_iterations: (a: number) => number;
export const heatmap_labels: (a: number) => [number, number];
export const heatmap_metric: (a: number) => number;
export const heatmap_nx: (a: number) => number;
export const heatmap_ny: (a: number) => number;
export const heatmap_values: (a: number) => [number, number];
export const multiplierCurve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const poissonSolve: (a: number, b: number, c: number, d: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
