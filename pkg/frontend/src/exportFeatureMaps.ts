/**
 * Dumps model output arrays into the engine's tensor container and writes a
 * manifest tying image ids to tensor files.
 */

import { existsSync, mkdirSync, readFileSync, writeFileSync } from 'node:fs'
import { dirname, join, resolve } from 'node:path'
import { readNpyFile } from './npy.js'
import { Tensor, writeTensorFile } from './tensorFile.js'

export const FEATURE_CHANNELS = 16

export interface ExportEntry {
  id: string
  /** in-memory array, or a path to a .npy dump */
  source: Tensor | string
}

export interface ManifestImage {
  id: string
  tensor: string
}

export interface ExportManifest {
  input_size: number
  annotations: string
  images: ManifestImage[]
}

export class ExportError extends Error {}

function loadEntry(entry: ExportEntry): Tensor {
  const tensor = typeof entry.source === 'string' ? readNpyFile(entry.source) : entry.source
  if (tensor.dims.length !== 3 || tensor.dims[0] !== FEATURE_CHANNELS) {
    throw new ExportError(
      `image ${entry.id}: expected a (${FEATURE_CHANNELS}, h, w) array, got (${tensor.dims})`,
    )
  }
  return tensor
}

export function exportFeatureMaps(
  entries: ExportEntry[],
  outDir: string,
  options: { inputSize: number; annotationsPath: string },
): ExportManifest {
  mkdirSync(outDir, { recursive: true })
  const images: ManifestImage[] = []
  for (const entry of [...entries].sort((a, b) => a.id.localeCompare(b.id))) {
    const tensor = loadEntry(entry)
    const name = `${entry.id}.pred.tnsr`
    writeTensorFile(tensor, join(outDir, name))
    images.push({ id: entry.id, tensor: name })
  }
  const manifest: ExportManifest = {
    input_size: options.inputSize,
    annotations: resolve(options.annotationsPath),
    images,
  }
  writeFileSync(join(outDir, 'manifest.json'), JSON.stringify(manifest, null, 2) + '\n')
  return manifest
}

export function loadManifest(path: string): ExportManifest {
  const manifest = JSON.parse(readFileSync(path, 'utf-8')) as ExportManifest
  const base = dirname(resolve(path))
  if (!existsSync(manifest.annotations)) {
    throw new ExportError(`manifest references missing annotations ${manifest.annotations}`)
  }
  for (const image of manifest.images) {
    const tensorPath = join(base, image.tensor)
    if (!existsSync(tensorPath)) {
      throw new ExportError(`manifest references missing tensor ${tensorPath}`)
    }
  }
  return manifest
}
