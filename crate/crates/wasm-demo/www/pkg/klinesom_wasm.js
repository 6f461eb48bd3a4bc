/**
 * Mini walk-forward backtest outcome: the cumulative profit-rate curve plus
 * the headline indicators.
 */
export class BacktestView {
    static __wrap(ptr) {
        const obj = Object.create(BacktestView.prototype);
        obj.__wbg_ptr = ptr;
        BacktestViewFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        BacktestViewFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_backtestview_free(ptr, 0);
    }
    /**
     * Accuracy in percent; NaN when no trade executed.
     * @returns {number}
     */
    get accuracy_pct() {
        const ret = wasm.__wbg_get_backtestview_accuracy_pct(this.__wbg_ptr);
        return ret;
    }
    /**
     * Cumulative PR (percent) sampled once per test bar.
     * @returns {Float64Array}
     */
    get equity() {
        const ret = wasm.__wbg_get_backtestview_equity(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {number}
     */
    get losers() {
        const ret = wasm.__wbg_get_backtestview_losers(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get pr_pct() {
        const ret = wasm.__wbg_get_backtestview_pr_pct(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get test_bars() {
        const ret = wasm.__wbg_get_backtestview_test_bars(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get trades() {
        const ret = wasm.__wbg_get_backtestview_trades(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get winners() {
        const ret = wasm.__wbg_get_backtestview_winners(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * Accuracy in percent; NaN when no trade executed.
     * @param {number} arg0
     */
    set accuracy_pct(arg0) {
        wasm.__wbg_set_backtestview_accuracy_pct(this.__wbg_ptr, arg0);
    }
    /**
     * Cumulative PR (percent) sampled once per test bar.
     * @param {Float64Array} arg0
     */
    set equity(arg0) {
        const ptr0 = passArrayF64ToWasm0(arg0, wasm.__wbindgen_malloc);
        const len0 = WASM_VECTOR_LEN;
        wasm.__wbg_set_backtestview_equity(this.__wbg_ptr, ptr0, len0);
    }
    /**
     * @param {number} arg0
     */
    set losers(arg0) {
        wasm.__wbg_set_backtestview_losers(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set pr_pct(arg0) {
        wasm.__wbg_set_backtestview_pr_pct(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set test_bars(arg0) {
        wasm.__wbg_set_backtestview_test_bars(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set trades(arg0) {
        wasm.__wbg_set_backtestview_trades(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set winners(arg0) {
        wasm.__wbg_set_backtestview_winners(this.__wbg_ptr, arg0);
    }
}
if (Symbol.dispose) BacktestView.prototype[Symbol.dispose] = BacktestView.prototype.free;

/**
 * One rendered candlestick window as RGBA pixels (row 0 is the highest
 * price, ready for putImageData).
 */
export class ChartView {
    static __wrap(ptr) {
        const obj = Object.create(ChartView.prototype);
        obj.__wbg_ptr = ptr;
        ChartViewFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        ChartViewFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_chartview_free(ptr, 0);
    }
    /**
     * @returns {number}
     */
    get height() {
        const ret = wasm.__wbg_get_chartview_height(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get price_max() {
        const ret = wasm.__wbg_get_chartview_price_max(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get price_min() {
        const ret = wasm.__wbg_get_chartview_price_min(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {Uint8Array}
     */
    get rgba() {
        const ret = wasm.__wbg_get_chartview_rgba(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @returns {string}
     */
    get start_label() {
        let deferred1_0;
        let deferred1_1;
        try {
            const ret = wasm.__wbg_get_chartview_start_label(this.__wbg_ptr);
            deferred1_0 = ret[0];
            deferred1_1 = ret[1];
            return getStringFromWasm0(ret[0], ret[1]);
        } finally {
            wasm.__wbindgen_free(deferred1_0, deferred1_1, 1);
        }
    }
    /**
     * @returns {number}
     */
    get width() {
        const ret = wasm.__wbg_get_chartview_width(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get window_count() {
        const ret = wasm.__wbg_get_chartview_window_count(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @param {number} arg0
     */
    set height(arg0) {
        wasm.__wbg_set_chartview_height(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set price_max(arg0) {
        wasm.__wbg_set_chartview_price_max(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set price_min(arg0) {
        wasm.__wbg_set_chartview_price_min(this.__wbg_ptr, arg0);
    }
    /**
     * @param {Uint8Array} arg0
     */
    set rgba(arg0) {
        const ptr0 = passArray8ToWasm0(arg0, wasm.__wbindgen_malloc);
        const len0 = WASM_VECTOR_LEN;
        wasm.__wbg_set_chartview_rgba(this.__wbg_ptr, ptr0, len0);
    }
    /**
     * @param {string} arg0
     */
    set start_label(arg0) {
        const ptr0 = passStringToWasm0(arg0, wasm.__wbindgen_malloc, wasm.__wbindgen_realloc);
        const len0 = WASM_VECTOR_LEN;
        wasm.__wbg_set_chartview_start_label(this.__wbg_ptr, ptr0, len0);
    }
    /**
     * @param {number} arg0
     */
    set width(arg0) {
        wasm.__wbg_set_chartview_width(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set window_count(arg0) {
        wasm.__wbg_set_chartview_window_count(this.__wbg_ptr, arg0);
    }
}
if (Symbol.dispose) ChartView.prototype[Symbol.dispose] = ChartView.prototype.free;

/**
 * Output-lattice statistics after clustering every window of the series.
 */
export class ClusterView {
    static __wrap(ptr) {
        const obj = Object.create(ClusterView.prototype);
        obj.__wbg_ptr = ptr;
        ClusterViewFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        ClusterViewFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_clusterview_free(ptr, 0);
    }
    /**
     * Cluster id per window, in time order.
     * @returns {Uint16Array}
     */
    get assignments() {
        const ret = wasm.__wbg_get_clusterview_assignments(this.__wbg_ptr);
        var v1 = getArrayU16FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 2, 2);
        return v1;
    }
    /**
     * Windows assigned to each output neuron, row-major.
     * @returns {Uint32Array}
     */
    get hits() {
        const ret = wasm.__wbg_get_clusterview_hits(this.__wbg_ptr);
        var v1 = getArrayU32FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 4, 4);
        return v1;
    }
    /**
     * @returns {Uint32Array}
     */
    get layer_iterations() {
        const ret = wasm.__wbg_get_clusterview_layer_iterations(this.__wbg_ptr);
        var v1 = getArrayU32FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 4, 4);
        return v1;
    }
    /**
     * @returns {number}
     */
    get output_cols() {
        const ret = wasm.__wbg_get_clusterview_output_cols(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get output_iterations() {
        const ret = wasm.__wbg_get_clusterview_output_iterations(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get output_rows() {
        const ret = wasm.__wbg_get_clusterview_output_rows(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get window_count() {
        const ret = wasm.__wbg_get_clusterview_window_count(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * Cluster id per window, in time order.
     * @param {Uint16Array} arg0
     */
    set assignments(arg0) {
        const ptr0 = passArray16ToWasm0(arg0, wasm.__wbindgen_malloc);
        const len0 = WASM_VECTOR_LEN;
        wasm.__wbg_set_clusterview_assignments(this.__wbg_ptr, ptr0, len0);
    }
    /**
     * Windows assigned to each output neuron, row-major.
     * @param {Uint32Array} arg0
     */
    set hits(arg0) {
        const ptr0 = passArray32ToWasm0(arg0, wasm.__wbindgen_malloc);
        const len0 = WASM_VECTOR_LEN;
        wasm.__wbg_set_clusterview_hits(this.__wbg_ptr, ptr0, len0);
    }
    /**
     * @param {Uint32Array} arg0
     */
    set layer_iterations(arg0) {
        const ptr0 = passArray32ToWasm0(arg0, wasm.__wbindgen_malloc);
        const len0 = WASM_VECTOR_LEN;
        wasm.__wbg_set_clusterview_layer_iterations(this.__wbg_ptr, ptr0, len0);
    }
    /**
     * @param {number} arg0
     */
    set output_cols(arg0) {
        wasm.__wbg_set_clusterview_output_cols(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set output_iterations(arg0) {
        wasm.__wbg_set_clusterview_output_iterations(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set output_rows(arg0) {
        wasm.__wbg_set_clusterview_output_rows(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set window_count(arg0) {
        wasm.__wbg_set_clusterview_window_count(this.__wbg_ptr, arg0);
    }
}
if (Symbol.dispose) ClusterView.prototype[Symbol.dispose] = ClusterView.prototype.free;

/**
 * @param {number} seed
 * @param {number} days
 * @param {number} trend
 * @param {number} amplitude
 * @param {number} noise
 * @param {number} rate_bp
 * @param {number} fee_bp
 * @returns {BacktestView}
 */
export function backtest_view(seed, days, trend, amplitude, noise, rate_bp, fee_bp) {
    const ret = wasm.backtest_view(seed, days, trend, amplitude, noise, rate_bp, fee_bp);
    return BacktestView.__wrap(ret);
}

/**
 * @param {number} seed
 * @param {number} days
 * @param {number} trend
 * @param {number} amplitude
 * @param {number} noise
 * @param {number} window
 * @returns {ChartView}
 */
export function chart_view(seed, days, trend, amplitude, noise, window) {
    const ret = wasm.chart_view(seed, days, trend, amplitude, noise, window);
    return ChartView.__wrap(ret);
}

/**
 * @param {number} seed
 * @param {number} days
 * @param {number} trend
 * @param {number} amplitude
 * @param {number} noise
 * @returns {ClusterView}
 */
export function cluster_view(seed, days, trend, amplitude, noise) {
    const ret = wasm.cluster_view(seed, days, trend, amplitude, noise);
    return ClusterView.__wrap(ret);
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg___wbindgen_throw_bb96b2010945f0bc: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./klinesom_wasm_bg.js": import0,
    };
}

const BacktestViewFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_backtestview_free(ptr, 1));
const ChartViewFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_chartview_free(ptr, 1));
const ClusterViewFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_clusterview_free(ptr, 1));

function getArrayF64FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat64ArrayMemory0().subarray(ptr / 8, ptr / 8 + len);
}

function getArrayU16FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getUint16ArrayMemory0().subarray(ptr / 2, ptr / 2 + len);
}

function getArrayU32FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getUint32ArrayMemory0().subarray(ptr / 4, ptr / 4 + len);
}

function getArrayU8FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getUint8ArrayMemory0().subarray(ptr / 1, ptr / 1 + len);
}

let cachedFloat64ArrayMemory0 = null;
function getFloat64ArrayMemory0() {
    if (cachedFloat64ArrayMemory0 === null || cachedFloat64ArrayMemory0.byteLength === 0) {
        cachedFloat64ArrayMemory0 = new Float64Array(wasm.memory.buffer);
    }
    return cachedFloat64ArrayMemory0;
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint16ArrayMemory0 = null;
function getUint16ArrayMemory0() {
    if (cachedUint16ArrayMemory0 === null || cachedUint16ArrayMemory0.byteLength === 0) {
        cachedUint16ArrayMemory0 = new Uint16Array(wasm.memory.buffer);
    }
    return cachedUint16ArrayMemory0;
}

let cachedUint32ArrayMemory0 = null;
function getUint32ArrayMemory0() {
    if (cachedUint32ArrayMemory0 === null || cachedUint32ArrayMemory0.byteLength === 0) {
        cachedUint32ArrayMemory0 = new Uint32Array(wasm.memory.buffer);
    }
    return cachedUint32ArrayMemory0;
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function passArray16ToWasm0(arg, malloc) {
    const ptr = malloc(arg.length * 2, 2) >>> 0;
    getUint16ArrayMemory0().set(arg, ptr / 2);
    WASM_VECTOR_LEN = arg.length;
    return ptr;
}

function passArray32ToWasm0(arg, malloc) {
    const ptr = malloc(arg.length * 4, 4) >>> 0;
    getUint32ArrayMemory0().set(arg, ptr / 4);
    WASM_VECTOR_LEN = arg.length;
    return ptr;
}

function passArray8ToWasm0(arg, malloc) {
    const ptr = malloc(arg.length * 1, 1) >>> 0;
    getUint8ArrayMemory0().set(arg, ptr / 1);
    WASM_VECTOR_LEN = arg.length;
    return ptr;
}

function passArrayF64ToWasm0(arg, malloc) {
    const ptr = malloc(arg.length * 8, 8) >>> 0;
    getFloat64ArrayMemory0().set(arg, ptr / 8);
    WASM_VECTOR_LEN = arg.length;
    return ptr;
}

function passStringToWasm0(arg, malloc, realloc) {
    if (realloc === undefined) {
        const buf = cachedTextEncoder.encode(arg);
        const ptr = malloc(buf.length, 1) >>> 0;
        getUint8ArrayMemory0().subarray(ptr, ptr + buf.length).set(buf);
        WASM_VECTOR_LEN = buf.length;
        return ptr;
    }

    let len = arg.length;
    let ptr = malloc(len, 1) >>> 0;

    const mem = getUint8ArrayMemory0();

    let offset = 0;

    for (; offset < len; offset++) {
        const code = arg.charCodeAt(offset);
        if (code > 0x7F) break;
        mem[ptr + offset] = code;
    }
    if (offset !== len) {
        if (offset !== 0) {
            arg = arg.slice(offset);
        }
        ptr = realloc(ptr, len, len = offset + arg.length * 3, 1) >>> 0;
        const view = getUint8ArrayMemory0().subarray(ptr + offset, ptr + len);
        const ret = cachedTextEncoder.encodeInto(arg, view);

        offset += ret.written;
        ptr = realloc(ptr, len, offset, 1) >>> 0;
    }

    WASM_VECTOR_LEN = offset;
    return ptr;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

const cachedTextEncoder = new TextEncoder();

if (!('encodeInto' in cachedTextEncoder)) {
    cachedTextEncoder.encodeInto = function (arg, view) {
        const buf = cachedTextEncoder.encode(arg);
        view.set(buf);
        return {
            read: arg.length,
            written: buf.length
        };
    };
}

let WASM_VECTOR_LEN = 0;

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedFloat64ArrayMemory0 = null;
    cachedUint16ArrayMemory0 = null;
    cachedUint32ArrayMemory0 = null;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = module.ok && expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('klinesom_wasm_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
