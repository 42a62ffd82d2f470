"""Low-level primitives for nopython code: acquire/release row counters,
spin-wait hints and an optimisation barrier used to force scalar code."""

import platform

from llvmlite import binding as llvm
from llvmlite import ir
from numba import njit, types
from numba.core import cgutils
from numba.extending import intrinsic

_IS_X86 = platform.machine().lower() in ("x86_64", "amd64", "i386", "i686")

SPIN_LIMIT = 1024

# non-empty inline asm (``pause``) needs the target asm parser
llvm.initialize_native_asmparser()


def _item_pointer(context, builder, aryty, ary_val, idx):
    ary = context.make_array(aryty)(context, builder, ary_val)
    return cgutils.get_item_pointer(context, builder, aryty, ary, [idx])


@intrinsic
def load_acquire(typingctx, arr, idx):
    """Atomic load of ``arr[idx]`` (int64) with acquire ordering."""
    if not (isinstance(arr, types.Array) and arr.dtype == types.int64):
        return None
    sig = types.int64(arr, idx)

    def codegen(context, builder, sig, args):
        ptr = _item_pointer(context, builder, sig.args[0], args[0], args[1])
        return builder.load_atomic(ptr, "acquire", 8)

    return sig, codegen


@intrinsic
def store_release(typingctx, arr, idx, value):
    """Atomic store ``arr[idx] = value`` (int64) with release ordering."""
    if not (isinstance(arr, types.Array) and arr.dtype == types.int64):
        return None
    sig = types.void(arr, idx, value)

    def codegen(context, builder, sig, args):
        ptr = _item_pointer(context, builder, sig.args[0], args[0], args[1])
        val = context.cast(builder, args[2], sig.args[2], types.int64)
        builder.store_atomic(val, ptr, "release", 8)
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def cpu_relax(typingctx):
    """Spin-loop hint (``pause`` on x86)."""
    sig = types.void()

    def codegen(context, builder, sig, args):
        fnty = ir.FunctionType(ir.VoidType(), [])
        asm = "pause" if _IS_X86 else ""
        builder.call(ir.InlineAsm(fnty, asm, "~{memory}", side_effect=True), [])
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def no_vectorize(typingctx):
    """Empty side-effecting asm statement.

    Placed once per lane group it stops the loop vectoriser from fusing
    groups, so the group body is the only unit LLVM may widen. With a group
    of one element this yields genuinely scalar code.
    """
    sig = types.void()

    def codegen(context, builder, sig, args):
        fnty = ir.FunctionType(ir.VoidType(), [])
        builder.call(ir.InlineAsm(fnty, "", "", side_effect=True), [])
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def sched_yield(typingctx):
    sig = types.void()

    def codegen(context, builder, sig, args):
        fnty = ir.FunctionType(ir.IntType(32), [])
        fn = cgutils.get_or_insert_function(builder.module, fnty, "sched_yield")
        builder.call(fn, [])
        return context.get_dummy_value()

    return sig, codegen


@njit(nogil=True, cache=True)
def wait_for(counter, need, abort):
    """Spin until ``counter[0] >= need``; returns the observed count, or -1
    if ``abort[0]`` was raised meanwhile."""
    seen = load_acquire(counter, 0)
    spins = 1
    while seen < need:
        if load_acquire(abort, 0) != 0:
            return -1
        if spins <= SPIN_LIMIT:
            for _ in range(spins):
                cpu_relax()
            spins *= 2
        else:
            sched_yield()
        seen = load_acquire(counter, 0)
    return seen


@njit(nogil=True, cache=True)
def publish(counter, value):
    store_release(counter, 0, value)


@njit(nogil=True, cache=True)
def read_counter(counter):
    return load_acquire(counter, 0)
