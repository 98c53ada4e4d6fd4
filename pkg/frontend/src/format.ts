/**
 * Binary artifact formats shared with the unlearning toolkit
 * (little-endian throughout):
 *
 *   SFUFEAT1  features: 8-byte magic, u32 n, u32 d, u32 k,
 *             n*d float32 features (row-major), n u32 labels.
 *   SFUJRES1  residual targets: 8-byte magic, u32 n, u32 d, u32 k,
 *             n*k float32 targets (row-major). d echoes the paired
 *             Jacobian-feature width for cross-checking.
 */

import { readFileSync, writeFileSync } from 'fs'

export const FEATURE_MAGIC = 'SFUFEAT1'
export const RESIDUAL_MAGIC = 'SFUJRES1'

export interface FeatureFile {
  n: number
  d: number
  k: number
  /** n*d row-major */
  features: Float32Array
  labels: Uint32Array
}

function writeHeader(view: DataView, magic: string, n: number, d: number, k: number): number {
  for (let i = 0; i < 8; i++) view.setUint8(i, magic.charCodeAt(i))
  view.setUint32(8, n, true)
  view.setUint32(12, d, true)
  view.setUint32(16, k, true)
  return 20
}

export function encodeFeatures(
  features: Float32Array,
  labels: Uint32Array,
  d: number,
  k: number,
): Buffer {
  const n = labels.length
  if (features.length !== n * d) {
    throw new Error(`features length ${features.length} != n*d = ${n * d}`)
  }
  for (const label of labels) {
    if (label >= k) throw new Error(`label ${label} out of range [0, ${k})`)
  }
  const buf = Buffer.alloc(20 + n * d * 4 + n * 4)
  const view = new DataView(buf.buffer, buf.byteOffset, buf.length)
  let off = writeHeader(view, FEATURE_MAGIC, n, d, k)
  for (let i = 0; i < n * d; i++, off += 4) view.setFloat32(off, features[i], true)
  for (let i = 0; i < n; i++, off += 4) view.setUint32(off, labels[i], true)
  return buf
}

export function encodeResiduals(
  targets: Float32Array,
  n: number,
  jacobianDim: number,
  k: number,
): Buffer {
  if (targets.length !== n * k) {
    throw new Error(`targets length ${targets.length} != n*k = ${n * k}`)
  }
  const buf = Buffer.alloc(20 + n * k * 4)
  const view = new DataView(buf.buffer, buf.byteOffset, buf.length)
  let off = writeHeader(view, RESIDUAL_MAGIC, n, jacobianDim, k)
  for (let i = 0; i < n * k; i++, off += 4) view.setFloat32(off, targets[i], true)
  return buf
}

export function writeFeatureFile(
  path: string,
  features: Float32Array,
  labels: Uint32Array,
  d: number,
  k: number,
): void {
  writeFileSync(path, encodeFeatures(features, labels, d, k))
}

export function writeResidualFile(
  path: string,
  targets: Float32Array,
  n: number,
  jacobianDim: number,
  k: number,
): void {
  writeFileSync(path, encodeResiduals(targets, n, jacobianDim, k))
}

export function readFeatureFile(path: string): FeatureFile {
  const buf = readFileSync(path)
  const magic = buf.toString('ascii', 0, 8)
  if (magic !== FEATURE_MAGIC) {
    throw new Error(`${path}: expected magic ${FEATURE_MAGIC}, got ${magic}`)
  }
  const view = new DataView(buf.buffer, buf.byteOffset, buf.length)
  const n = view.getUint32(8, true)
  const d = view.getUint32(12, true)
  const k = view.getUint32(16, true)
  if (buf.length !== 20 + n * d * 4 + n * 4) {
    throw new Error(`${path}: truncated feature file`)
  }
  const features = new Float32Array(n * d)
  let off = 20
  for (let i = 0; i < n * d; i++, off += 4) features[i] = view.getFloat32(off, true)
  const labels = new Uint32Array(n)
  for (let i = 0; i < n; i++, off += 4) labels[i] = view.getUint32(off, true)
  return { n, d, k, features, labels }
}
