/** Seeded PRNG utilities so every extraction run is bit-reproducible. */

/** sfc32: small-state PRNG with a 32-bit seed expansion via splitmix32. */
export function makeRng(seed: number): () => number {
  let s = seed >>> 0
  const next32 = () => {
    s = (s + 0x9e3779b9) >>> 0
    let z = s
    z = Math.imul(z ^ (z >>> 16), 0x21f0aaad)
    z = Math.imul(z ^ (z >>> 15), 0x735a2d97)
    return (z ^ (z >>> 15)) >>> 0
  }
  let a = next32()
  let b = next32()
  let c = next32()
  let d = next32()
  return () => {
    const t = (((a + b) | 0) + d) | 0
    d = (d + 1) | 0
    a = b ^ (b >>> 9)
    b = (c + (c << 3)) | 0
    c = ((c << 21) | (c >>> 11)) | 0
    c = (c + t) | 0
    return (t >>> 0) / 4294967296
  }
}

/** Standard normal samples via Box-Muller over the uniform stream. */
export function normalArray(rng: () => number, size: number, std = 1.0): Float32Array {
  const out = new Float32Array(size)
  for (let i = 0; i < size; i += 2) {
    const u = Math.max(rng(), 1e-12)
    const v = rng()
    const r = Math.sqrt(-2.0 * Math.log(u))
    out[i] = std * r * Math.cos(2.0 * Math.PI * v)
    if (i + 1 < size) out[i + 1] = std * r * Math.sin(2.0 * Math.PI * v)
  }
  return out
}
