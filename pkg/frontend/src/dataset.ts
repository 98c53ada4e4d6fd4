/**
 * Deterministic synthetic image dataset.
 *
 * The sandbox has no dataset downloads, so smoke extractions run on locally
 * generated images: per-class sinusoidal patterns plus seeded pixel noise,
 * all values in [0, 1]. Labels cycle through the classes so every class is
 * populated for any n >= k.
 */

import { makeRng } from './random.js'

export interface ImageBatch {
  /** n * size * size * 3, row-major NHWC */
  pixels: Float32Array
  labels: Uint32Array
  n: number
  size: number
  numClasses: number
}

export function syntheticImages(
  n: number,
  size: number,
  numClasses: number,
  seed: number,
): ImageBatch {
  const rng = makeRng(seed)
  const pixels = new Float32Array(n * size * size * 3)
  const labels = new Uint32Array(n)
  let off = 0
  for (let i = 0; i < n; i++) {
    const label = i % numClasses
    labels[i] = label
    const phase = (2 * Math.PI * label) / numClasses
    for (let y = 0; y < size; y++) {
      for (let x = 0; x < size; x++) {
        for (let c = 0; c < 3; c++, off++) {
          const wave = Math.sin(phase + ((x + y * (c + 1)) * 2 * Math.PI) / size)
          const value = 0.5 + 0.25 * wave + 0.25 * (rng() - 0.5)
          pixels[off] = Math.fround(Math.min(1, Math.max(0, value)))
        }
      }
    }
  }
  return { pixels, labels, n, size, numClasses }
}
