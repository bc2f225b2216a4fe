/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_scene_free: (a: number, b: number) => void;
export const figure_bones: () => [number, number];
export const heatmap_argmax: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const heatmap_rgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const scene_dea_rgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const scene_dev_plane_rgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const scene_event_count: (a: number) => number;
export const scene_events: (a: number) => [number, number];
export const scene_height: (a: number) => number;
export const scene_label_at: (a: number, b: number) => [number, number];
export const scene_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const scene_raster_points: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const scene_width: (a: number) => number;
export const simdr_argmax: (a: number, b: number, c: number) => [number, number, number, number];
export const simdr_vectors: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const storage_ratio: (a: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
