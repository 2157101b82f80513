/**
 * Adapter CLI: convert-dataset turns raw wireframe-style dumps into the
 * engine's annotation document; export-maps turns .npy model outputs into
 * tensor files plus a manifest.
 */

import { convertDatasetFile, DatasetError } from './convertDataset.js'
import { ExportError, exportFeatureMaps } from './exportFeatureMaps.js'
import { NpyFormatError } from './npy.js'
import { TensorFormatError } from './tensorFile.js'

function parseFlags(argv: string[]): Map<string, string[]> {
  const flags = new Map<string, string[]>()
  let key: string | null = null
  for (const token of argv) {
    if (token.startsWith('--')) {
      key = token.slice(2)
      if (!flags.has(key)) flags.set(key, [])
    } else if (key !== null) {
      flags.get(key)!.push(token)
    } else {
      throw new Error(`unexpected argument ${token}`)
    }
  }
  return flags
}

function need(flags: Map<string, string[]>, name: string): string {
  const values = flags.get(name)
  if (!values || values.length === 0) {
    throw new Error(`missing required flag --${name}`)
  }
  return values[0]
}

function runConvert(argv: string[]): number {
  const flags = parseFlags(argv)
  const report = convertDatasetFile(need(flags, 'src'), need(flags, 'out'))
  process.stdout.write(JSON.stringify(report) + '\n')
  return 0
}

function runExport(argv: string[]): number {
  const flags = parseFlags(argv)
  const entries = (flags.get('arrays') ?? []).map(pair => {
    const eq = pair.indexOf('=')
    if (eq <= 0) throw new Error(`--arrays expects id=path.npy, got ${pair}`)
    return { id: pair.slice(0, eq), source: pair.slice(eq + 1) }
  })
  if (entries.length === 0) throw new Error('no --arrays given')
  const manifest = exportFeatureMaps(entries, need(flags, 'out'), {
    inputSize: Number(flags.get('input-size')?.[0] ?? 512),
    annotationsPath: need(flags, 'annotations'),
  })
  process.stdout.write(JSON.stringify({ images: manifest.images.length }) + '\n')
  return 0
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv
  try {
    if (command === 'convert-dataset') return runConvert(rest)
    if (command === 'export-maps') return runExport(rest)
    process.stderr.write('usage: cli <convert-dataset|export-maps> [--flags]\n')
    return 2
  } catch (e) {
    if (
      e instanceof DatasetError ||
      e instanceof ExportError ||
      e instanceof TensorFormatError ||
      e instanceof NpyFormatError ||
      e instanceof Error
    ) {
      process.stderr.write(`error: ${(e as Error).message}\n`)
      return 2
    }
    throw e
  }
}

if (process.argv[1]?.endsWith('cli.js')) {
  process.exit(main(process.argv.slice(2)))
}
