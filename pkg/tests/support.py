"""Shared helpers for the test suite."""

import asyncio

from meshwire.geometry import Vec3


def run_async(coro, timeout: float = 60.0):
    """Run a coroutine to completion with a hard timeout."""
    return asyncio.run(asyncio.wait_for(coro, timeout))


def close(a: float, b: float, tol: float = 1e-9) -> bool:
    return abs(a - b) <= tol


def vec_close(a: Vec3, b: Vec3, tol: float = 1e-9) -> bool:
    return close(a.x, b.x, tol) and close(a.y, b.y, tol) and close(a.z, b.z, tol)
