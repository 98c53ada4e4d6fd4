/**
 * Feature and Jacobian extraction jobs.
 *
 * Inference runs in evaluation mode (the network has no dropout or batch
 * normalization, so no state updates can leak between runs) and in fixed
 * batches; file writing is single-threaded. The cut point for Jacobian
 * extraction is the final linear head: for a bias-free linear layer the
 * per-sample Jacobian with respect to the head weights is the penultimate
 * activation vector repeated per class block, so the SFUFEAT1 file holds
 * those activations and the paired SFUJRES1 file holds the residual targets
 * y_i - f(x_i).
 */

import * as tf from '@tensorflow/tfjs'
import { writeFileSync } from 'fs'
import { ImageBatch, syntheticImages } from './dataset.js'
import { writeFeatureFile, writeResidualFile } from './format.js'
import { FeatureExtractor, buildFeatureExtractor } from './model.js'

export interface ExtractionJob {
  numImages: number
  imageSize: number
  numClasses: number
  penultimateWidth: number
  modelSeed: number
  dataSeed: number
  batchSize: number
  featuresPath: string
  residualsPath?: string
}

export const DEFAULT_JOB: Omit<ExtractionJob, 'featuresPath'> = {
  numImages: 10,
  imageSize: 16,
  numClasses: 10,
  penultimateWidth: 32,
  modelSeed: 0,
  dataSeed: 0,
  batchSize: 32,
}

export interface ExtractionResult {
  /** n * penultimateWidth penultimate activations */
  features: Float32Array
  /** n * numClasses head outputs */
  logits: Float32Array
  labels: Uint32Array
  model: FeatureExtractor
  images: ImageBatch
}

async function runBatched(
  model: tf.LayersModel,
  images: ImageBatch,
  batchSize: number,
  outWidth: number,
): Promise<Float32Array> {
  const { n, size } = images
  const out = new Float32Array(n * outWidth)
  for (let start = 0; start < n; start += batchSize) {
    const count = Math.min(batchSize, n - start)
    const input = tf.tensor4d(
      images.pixels.subarray(start * size * size * 3, (start + count) * size * size * 3),
      [count, size, size, 3],
    )
    const output = model.predict(input, { batchSize: count }) as tf.Tensor
    out.set(new Float32Array(await output.data()), start * outWidth)
    input.dispose()
    output.dispose()
  }
  return out
}

/** Run the trunk and head over the job's images; no files are written. */
export async function runExtraction(job: ExtractionJob): Promise<ExtractionResult> {
  const model = buildFeatureExtractor({
    imageSize: job.imageSize,
    numClasses: job.numClasses,
    penultimateWidth: job.penultimateWidth,
    seed: job.modelSeed,
  })
  const images = syntheticImages(job.numImages, job.imageSize, job.numClasses, job.dataSeed)
  const features = await runBatched(model.trunk, images, job.batchSize, job.penultimateWidth)
  const logits = await runBatched(model.classifier, images, job.batchSize, job.numClasses)
  return { features, logits, labels: images.labels, model, images }
}

function writeManifest(job: ExtractionJob, command: string): void {
  const lines = [
    `command=${command}`,
    'preprocessing=synthetic sinusoid+noise images, pixel range [0,1], NHWC float32',
    ...Object.entries(job).map(([key, value]) => `${key}=${value}`),
  ]
  writeFileSync(`${job.featuresPath}.manifest.txt`, lines.join('\n') + '\n')
}

/** Extract penultimate features into an SFUFEAT1 file. */
export async function extractFeatures(job: ExtractionJob): Promise<ExtractionResult> {
  const result = await runExtraction(job)
  writeFeatureFile(
    job.featuresPath,
    result.features,
    result.labels,
    job.penultimateWidth,
    job.numClasses,
  )
  writeManifest(job, 'features')
  return result
}

/** One-hot residual targets y_i - f(x_i) for the mixed-linear pipeline. */
export function computeResiduals(
  logits: Float32Array,
  labels: Uint32Array,
  numClasses: number,
  targets?: Float32Array,
): Float32Array {
  const n = labels.length
  const residuals = new Float32Array(n * numClasses)
  for (let i = 0; i < n; i++) {
    for (let c = 0; c < numClasses; c++) {
      const y = targets ? targets[i * numClasses + c] : c === labels[i] ? 1.0 : 0.0
      residuals[i * numClasses + c] = Math.fround(y - logits[i * numClasses + c])
    }
  }
  return residuals
}

/**
 * Extract a Jacobian-feature / residual-target pair (SFUFEAT1 + SFUJRES1).
 * `targets` overrides the default one-hot labels, e.g. for a head whose
 * outputs are the targets themselves (zero residuals).
 */
export async function extractJacobians(
  job: ExtractionJob,
  targets?: Float32Array,
): Promise<ExtractionResult> {
  if (!job.residualsPath) throw new Error('residualsPath is required')
  const result = await extractFeatures(job)
  const residuals = computeResiduals(result.logits, result.labels, job.numClasses, targets)
  writeResidualFile(
    job.residualsPath,
    residuals,
    job.numImages,
    job.penultimateWidth,
    job.numClasses,
  )
  return result
}
