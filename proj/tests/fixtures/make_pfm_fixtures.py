"""Writes the golden PFM fixtures with a writer independent of the C++ code.

Run from this directory: python3 make_pfm_fixtures.py
"""
import struct


def write(path, magic, width, height, channels, scale, value):
    order = ">" if scale > 0 else "<"
    body = bytearray()
    for row in reversed(range(height)):  # PFM stores the bottom row first
        for x in range(width):
            for c in range(channels):
                body += struct.pack(order + "f", value(x, row, c))
    header = f"{magic}\n{width} {height}\n{scale:g}\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header + body)


write("const_2x2_le.pfm", "Pf", 2, 2, 1, -1.0, lambda x, y, c: 1.5)
write("gray_3x2_le.pfm", "Pf", 3, 2, 1, -0.5, lambda x, y, c: x + 10 * y)
write("rgb_3x2_be.pfm", "PF", 3, 2, 3, 1.0, lambda x, y, c: x + 10 * y + 100 * c)
write("flow_2x2_le.pfm", "PF", 2, 2, 3, -1.0,
      lambda x, y, c: [x + 0.25, -float(y), 0.0][c])
