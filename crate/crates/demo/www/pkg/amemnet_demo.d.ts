/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Test accuracy per observation ratio for `rgb` or `flow`.
     */
    accuracy(stream: string): Float64Array;
    attention(stream: string, id: number, p: number): Float64Array;
    /**
     * Linear head trained directly on rgb partial features.
     */
    baseline(): Float64Array;
    classes(): number;
    /**
     * Accuracy per observation ratio of `rgb + beta * flow`.
     */
    fused(beta: number): Float64Array;
    label(id: number): number;
    /**
     * Generates the data and trains both streams; takes a few seconds.
     */
    constructor(seed: number, slots: number, lambda_rec: number, epochs: number, lr: number);
    probabilities(stream: string, id: number, p: number): Float64Array;
    /**
     * Reconstruction loss after every generator update.
     */
    reconstruction_curve(stream: string): Float64Array;
    test_ids(): Uint32Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_accuracy: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_attention: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_baseline: (a: number) => [number, number];
    readonly demo_classes: (a: number) => number;
    readonly demo_fused: (a: number, b: number) => [number, number, number, number];
    readonly demo_label: (a: number, b: number) => [number, number, number];
    readonly demo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly demo_probabilities: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_reconstruction_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_test_ids: (a: number) => [number, number];
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
