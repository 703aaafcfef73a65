/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    checkpoint(): string;
    drift_field(t: number, grid: number, extent: number): Float64Array;
    load_checkpoint(json: string): void;
    losses(): Float64Array;
    constructor(n: number, seed: bigint);
    source(): Float64Array;
    target(): Float64Array;
    train(epsilon: number, k: number, lr: number, iters: number, seed: bigint): number;
    trained(): boolean;
    /**
     * Flattened `n_paths x (steps + 1) x 2` states.
     */
    trajectories(x: number, y: number, n_paths: number, steps: number, seed: bigint): Float64Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_checkpoint: (a: number) => [number, number, number, number];
    readonly demo_drift_field: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_load_checkpoint: (a: number, b: number, c: number) => [number, number];
    readonly demo_losses: (a: number) => [number, number];
    readonly demo_new: (a: number, b: bigint) => [number, number, number];
    readonly demo_source: (a: number) => [number, number];
    readonly demo_target: (a: number) => [number, number];
    readonly demo_train: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
    readonly demo_trained: (a: number) => number;
    readonly demo_trajectories: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
