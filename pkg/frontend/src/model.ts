/**
 * Deterministic convolutional feature extractor.
 *
 * No pretrained weights are downloaded: the network is built locally and its
 * weights are drawn from a seeded generator, so two runs with the same seed
 * produce identical features. The architecture mirrors the usual
 * classifier shape — convolutional trunk, a penultimate dense feature layer,
 * and a bias-free linear head whose weights are the parameters the
 * mixed-linear pipeline linearizes over.
 */

import * as tf from '@tensorflow/tfjs'
import { makeRng, normalArray } from './random.js'

export interface ModelSpec {
  imageSize: number
  numClasses: number
  penultimateWidth: number
  seed: number
}

export interface FeatureExtractor {
  spec: ModelSpec
  /** full classifier: image -> logits */
  classifier: tf.LayersModel
  /** trunk: image -> penultimate activations */
  trunk: tf.LayersModel
  /** final linear head: penultimate -> logits, no bias */
  head: tf.layers.Layer
}

export const PENULTIMATE_LAYER = 'penultimate'
export const HEAD_LAYER = 'head'

export function buildFeatureExtractor(spec: ModelSpec): FeatureExtractor {
  const { imageSize, numClasses, penultimateWidth } = spec
  const classifier = tf.sequential({
    layers: [
      tf.layers.conv2d({
        filters: 8,
        kernelSize: 3,
        activation: 'relu',
        inputShape: [imageSize, imageSize, 3],
      }),
      tf.layers.maxPooling2d({ poolSize: 2 }),
      tf.layers.conv2d({ filters: 16, kernelSize: 3, activation: 'relu' }),
      tf.layers.globalAveragePooling2d({}),
      tf.layers.dense({
        units: penultimateWidth,
        activation: 'relu',
        name: PENULTIMATE_LAYER,
      }),
      tf.layers.dense({
        units: numClasses,
        useBias: false,
        name: HEAD_LAYER,
      }),
    ],
  })

  // Replace the default (non-deterministic) initialization with seeded
  // draws, std 1/sqrt(fan-in) per tensor so activations stay O(1).
  const rng = makeRng(spec.seed)
  const seeded = classifier.getWeights().map((w) => {
    const shape = w.shape
    const fanIn = shape.slice(0, -1).reduce((a, b) => a * (b ?? 1), 1)
    const values = normalArray(rng, w.size, 1.0 / Math.sqrt(Math.max(fanIn, 1)))
    return tf.tensor(values, shape as number[])
  })
  classifier.setWeights(seeded)
  seeded.forEach((t) => t.dispose())

  const trunk = tf.model({
    inputs: classifier.inputs,
    outputs: classifier.getLayer(PENULTIMATE_LAYER).output as tf.SymbolicTensor,
  })
  return {
    spec,
    classifier,
    trunk,
    head: classifier.getLayer(HEAD_LAYER),
  }
}

/** Read the head kernel as a row-major [penultimateWidth][numClasses] array. */
export async function headKernel(model: FeatureExtractor): Promise<Float32Array> {
  const kernel = model.head.getWeights()[0]
  return new Float32Array(await kernel.data())
}

/** Overwrite the head kernel (row-major [penultimateWidth][numClasses]). */
export function setHeadKernel(model: FeatureExtractor, values: Float32Array): void {
  const kernel = model.head.getWeights()[0]
  const next = tf.tensor(values, kernel.shape as number[])
  model.head.setWeights([next])
  next.dispose()
}
