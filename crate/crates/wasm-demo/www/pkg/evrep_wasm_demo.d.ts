/* tslint:disable */
/* eslint-disable */

/**
 * A synthetic stick figure moving for 100 ms, with its events and labels.
 */
export class Scene {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Fused DEA output on the raw DEV planes, shown as three `bins x bins`
     * panels side by side: `hw`, weighted `th` branch, weighted `wt` branch.
     */
    dea_rgba(bins: number, pooling: string): Uint8Array;
    /**
     * One two-channel DEV plane (`hw`, `th` or `wt`) of a `bins`-cube as RGBA.
     * `hw` is `bins` rows of `bins`; `th` rows are time bins; `wt` rows are x bins.
     */
    dev_plane_rgba(bins: number, plane: string): Uint8Array;
    event_count(): number;
    /**
     * `[x, y, tau, p]` per event with `tau` normalized to `[0, 1)`.
     */
    events(): Float32Array;
    height(): number;
    /**
     * Label joints `[u0, v0, u1, v1, ...]` nearest to the normalized time `tau`.
     */
    label_at(tau: number): Float64Array;
    constructor(width: number, height: number, seed: number, threshold: number);
    /**
     * Rasterized cloud as `[x, y, t_avg, p_acc, e_cnt]` rows; `sample_n = 0` keeps every point.
     */
    raster_points(k: number, sample_n: number, seed: number): Float32Array;
    width(): number;
}

/**
 * Joint index pairs of the synthetic figure, flattened.
 */
export function figure_bones(): Uint32Array;

/**
 * Argmax `[x, y]` of the heatmap for `(x, y)`.
 */
export function heatmap_argmax(x: number, y: number, size: number, sigma: number): Uint32Array;

/**
 * A `size x size` Gaussian heatmap around `(x, y)` as RGBA.
 */
export function heatmap_rgba(x: number, y: number, size: number, sigma: number): Uint8Array;

/**
 * Argmax `[x, y]` of concatenated SimDR vectors.
 */
export function simdr_argmax(vectors: Float32Array, width: number): Uint32Array;

/**
 * The SimDR x and y vectors for `(x, y)`, concatenated (`width + height` values).
 */
export function simdr_vectors(x: number, y: number, width: number, height: number, sigma: number): Float32Array;

/**
 * Tri-plane over full-grid cell ratio for a `bins`-cube.
 */
export function storage_ratio(bins: number): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_scene_free: (a: number, b: number) => void;
    readonly figure_bones: () => [number, number];
    readonly heatmap_argmax: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly heatmap_rgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly scene_dea_rgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly scene_dev_plane_rgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly scene_event_count: (a: number) => number;
    readonly scene_events: (a: number) => [number, number];
    readonly scene_height: (a: number) => number;
    readonly scene_label_at: (a: number, b: number) => [number, number];
    readonly scene_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly scene_raster_points: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly scene_width: (a: number) => number;
    readonly simdr_argmax: (a: number, b: number, c: number) => [number, number, number, number];
    readonly simdr_vectors: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly storage_ratio: (a: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
