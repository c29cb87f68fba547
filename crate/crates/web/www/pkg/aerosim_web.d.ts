/* tslint:disable */
/* eslint-disable */

export function horizonKm(h_tx_km: number, h_rx_km: number): number;

/**
 * Flattened `[d, fspl, snr, per]` rows; NaN marks "beyond the horizon".
 */
export function linkCurve(f_mhz: number, h_tx_km: number, h_rx_km: number, max_km: number, points: number): Float64Array;

/**
 * Flattened `[d, expected, observed]` rows.
 */
export function radioSweep(min_km: number, max_km: number, points: number, packets: number, seed: number): Float64Array;

/**
 * Row-major `frames x slots` grid of node indices, -1 for an idle slot.
 */
export function tdmaFrames(backlog: Uint32Array, slots: number, frames: number): Int32Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly horizonKm: (a: number, b: number) => [number, number, number];
    readonly linkCurve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly radioSweep: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly tdmaFrames: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
