"""Structured round-trip kernels: one loop each, unrolled by the tests before re-rolling."""

# (name, trip, step, body) where the loop header is derived from trip/step;
# body lines use ``i`` and may index with any affine expression of it.
CASES = [
    ("acc2", 2, 1, ["o[0] = o[0] + a[i];"]),
    ("xor3", 3, 1, ["o[i] = a[i] ^ b[i];"]),
    ("scale4", 4, 1, ["o[i] = a[i] * 3;"]),
    ("rev5", 5, -1, ["o[i] = a[i] + b[4 - i];"]),
    ("shift6", 6, 1, ["o[i] = a[i] << (i + 1);"]),
    ("mac7", 7, 1, ["o[0] = o[0] + a[i] * b[i];"]),
    ("even8", 8, 2, ["o[i] = a[i] + a[i + 1];"]),
    ("odd8", 8, 2, ["o[i + 1] = a[i] - b[i + 1];"]),
    ("down9", 9, -1, ["o[i] = a[i] & 0xff;"]),
    ("step3_10", 10, 3, ["o[i] = a[i] | b[i];"]),
    ("twohole11", 11, 1, ["o[i] = a[i] + (b[i] << 3);"]),
    ("mix12", 12, 1, ["o[i] = a[i] * b[11 - i] + 7;"]),
    ("down2_13", 13, -2, ["o[i] = a[i] ^ 0x55;"]),
    ("stride14", 14, 1, ["o[i] = a[2 * i] + a[2 * i + 1];"]),
    ("acc15", 15, 1, ["o[0] = o[0] ^ a[i];"]),
    ("full16", 16, 1, ["o[i] = a[i] * a[i];"]),
    ("holes3_6", 6, 1, ["p[i] = a[2 * i + 1] ^ (b[i] >> (i + 2));"]),
    ("holes_step2", 8, 2, ["o[i + 1] = a[i] * b[16 - i] + p[i];"]),
    ("holes_neg2", 12, -2, ["p[i] = (a[i] << 2) + b[30 - i];"]),
    ("carry4", 4, 1, ["(o[i], q[i]) = addcarry_u64(q[i], a[i], b[i]);"]),
    ("sel5", 5, 1, ["o[i] = cmovznz_u64(c[0], a[i], b[i]);"]),
    ("wide3_16", 16, 3, ["o[i] = (a[i] >> 2) + b[i];"]),
]

SIZE = 48  # every array is large enough for all index expressions above


def _header(trip: int, step: int) -> str:
    if step > 0:
        return f"for (int i = 0; i < {trip * step}; i += {step})"
    start = (trip - 1) * -step
    return f"for (int i = {start}; i >= 0; i -= {-step})"


def source(name: str, trip: int, step: int, body: list[str]) -> str:
    params = [f"const u64 a[{SIZE}]", f"const u64 b[{SIZE}]", "const u64 c[1]",
              f"u64 o[{SIZE}]", f"u64 p[{SIZE}]", f"u1 q[{SIZE}]"]
    lines = [f"void {name}({', '.join(params)}) {{", f"    L: {_header(trip, step)} {{"]
    lines += [f"        {b}" for b in body]
    lines += ["    }", "}", ""]
    return "\n".join(lines)


def all_sources():
    for name, trip, step, body in CASES:
        yield name, trip, source(name, trip, step, body)
