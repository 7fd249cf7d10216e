/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Learns the dynamics and clusters the elements; returns JSON.
     */
    analyze(bins: number, k_max: number): string;
    /**
     * Feature vector of `element` in frame `t`, or empty if it is absent.
     */
    descriptor(t: number, element: number, bins: number): Float64Array;
    /**
     * Element under pixel `(x, y)` of frame `t`, or -1.
     */
    element_at(t: number, x: number, y: number): number;
    /**
     * RGBA pixels of frame `t`; with `outline` each matte boundary is tinted.
     */
    frame_rgba(t: number, outline: boolean): Uint8Array;
    frames(): number;
    height(): number;
    /**
     * Eight-element sequence; `opposite` makes the squares turn clockwise.
     */
    constructor(opposite: boolean, seed: number);
    width(): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_analyze: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_descriptor: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_element_at: (a: number, b: number, c: number, d: number) => number;
    readonly demo_frame_rgba: (a: number, b: number, c: number) => [number, number];
    readonly demo_frames: (a: number) => number;
    readonly demo_height: (a: number) => number;
    readonly demo_new: (a: number, b: number) => [number, number, number];
    readonly demo_width: (a: number) => number;
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
