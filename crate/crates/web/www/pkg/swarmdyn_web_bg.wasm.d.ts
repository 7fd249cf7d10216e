/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_analyze: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_descriptor: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demo_element_at: (a: number, b: number, c: number, d: number) => number;
export const demo_frame_rgba: (a: number, b: number, c: number) => [number, number];
export const demo_frames: (a: number) => number;
export const demo_height: (a: number) => number;
export const demo_new: (a: number, b: number) => [number, number, number];
export const demo_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
