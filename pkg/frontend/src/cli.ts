#!/usr/bin/env node
/** Command-line entry point: `features` and `jacobians` extraction jobs. */

import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'
import { DEFAULT_JOB, ExtractionJob, extractFeatures, extractJacobians } from './extract.js'

const jobOptions = {
  n: { type: 'number' as const, default: DEFAULT_JOB.numImages, describe: 'number of images' },
  'image-size': { type: 'number' as const, default: DEFAULT_JOB.imageSize },
  classes: { type: 'number' as const, default: DEFAULT_JOB.numClasses },
  width: {
    type: 'number' as const,
    default: DEFAULT_JOB.penultimateWidth,
    describe: 'penultimate feature width',
  },
  'model-seed': { type: 'number' as const, default: DEFAULT_JOB.modelSeed },
  'data-seed': { type: 'number' as const, default: DEFAULT_JOB.dataSeed },
  'batch-size': { type: 'number' as const, default: DEFAULT_JOB.batchSize },
  features: { type: 'string' as const, demandOption: true, describe: 'output SFUFEAT1 path' },
}

function toJob(argv: Record<string, unknown>, residualsPath?: string): ExtractionJob {
  return {
    numImages: argv.n as number,
    imageSize: argv['image-size'] as number,
    numClasses: argv.classes as number,
    penultimateWidth: argv.width as number,
    modelSeed: argv['model-seed'] as number,
    dataSeed: argv['data-seed'] as number,
    batchSize: argv['batch-size'] as number,
    featuresPath: argv.features as string,
    residualsPath,
  }
}

export async function main(args: string[]): Promise<void> {
  await yargs(args)
    .command(
      'features',
      'extract penultimate features into an SFUFEAT1 file',
      jobOptions,
      async (argv) => {
        await extractFeatures(toJob(argv))
        console.log(`wrote ${argv.features}`)
      },
    )
    .command(
      'jacobians',
      'extract a Jacobian-feature / residual-target SFUFEAT1 + SFUJRES1 pair',
      {
        ...jobOptions,
        residuals: { type: 'string' as const, demandOption: true, describe: 'output SFUJRES1 path' },
      },
      async (argv) => {
        await extractJacobians(toJob(argv, argv.residuals as string))
        console.log(`wrote ${argv.features} and ${argv.residuals}`)
      },
    )
    .demandCommand(1)
    .strict()
    .parseAsync()
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split('/').pop() ?? '')
if (invokedDirectly) {
  main(hideBin(process.argv)).catch((err) => {
    console.error(err instanceof Error ? err.message : err)
    process.exitCode = 1
  })
}
