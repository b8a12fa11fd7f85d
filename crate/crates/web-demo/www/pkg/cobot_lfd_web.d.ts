/* tslint:disable */
/* eslint-disable */

/**
 * One demonstration and the two primitives fitted to it.
 */
export class DmpDemo {
    free(): void;
    [Symbol.dispose](): void;
    constructor();
    /**
     * Rolls out towards the demo goal shifted by `(dx, dy, dz)` meters, with
     * `tau` scaled by `time_scale`.
     */
    retarget(dx: number, dy: number, dz: number, time_scale: number, gated: boolean): string;
}

/**
 * Yaw sweep of the default bar under the default camera.
 */
export function detection_sweep(noise_mm: number, tolerance_mm: number, step_deg: number, seed: number): string;

/**
 * Paired teaching runs on the reference path for one seeded operator.
 */
export function teach_compare(seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_dmpdemo_free: (a: number, b: number) => void;
    readonly detection_sweep: (a: number, b: number, c: number, d: number) => [number, number];
    readonly dmpdemo_new: () => [number, number, number];
    readonly dmpdemo_retarget: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly teach_compare: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
