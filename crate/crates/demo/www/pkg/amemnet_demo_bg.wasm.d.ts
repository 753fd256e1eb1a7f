/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_accuracy: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_attention: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const demo_baseline: (a: number) => [number, number];
export const demo_classes: (a: number) => number;
export const demo_fused: (a: number, b: number) => [number, number, number, number];
export const demo_label: (a: number, b: number) => [number, number, number];
export const demo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const demo_probabilities: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const demo_reconstruction_curve: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_test_ids: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
