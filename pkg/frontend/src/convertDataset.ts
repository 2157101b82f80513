/**
 * Converts wireframe-style raw annotation dumps (an array of per-image
 * records with filename, size, and line rows) into the engine's annotation
 * document.  Pure format translation: zero-length lines are dropped and
 * counted, anything else out of contract is an error naming the entry.
 */

import { readFileSync, writeFileSync } from 'node:fs'
import { basename, extname } from 'node:path'

export interface RawImageRecord {
  filename: string
  width: number
  height: number
  lines: number[][]
}

export interface AnnotationImage {
  id: string
  width: number
  height: number
  lines: number[][]
}

export interface AnnotationDoc {
  images: AnnotationImage[]
}

export interface ConversionReport {
  images: number
  lines: number
  droppedZeroLength: number
}

export class DatasetError extends Error {}

const ID_PATTERN = /^[A-Za-z0-9._-]+$/

function asRecord(entry: unknown, index: number): RawImageRecord {
  if (typeof entry !== 'object' || entry === null) {
    throw new DatasetError(`entry ${index}: not an object`)
  }
  const rec = entry as Partial<RawImageRecord>
  if (typeof rec.filename !== 'string' || rec.filename.length === 0) {
    throw new DatasetError(`entry ${index}: missing filename`)
  }
  const name = rec.filename
  for (const field of ['width', 'height'] as const) {
    const v = rec[field]
    if (typeof v !== 'number' || !Number.isInteger(v) || v <= 0) {
      throw new DatasetError(`entry ${name}: ${field} must be a positive integer`)
    }
  }
  if (!Array.isArray(rec.lines)) {
    throw new DatasetError(`entry ${name}: lines must be an array`)
  }
  return rec as RawImageRecord
}

export function convertDataset(records: unknown[]): { doc: AnnotationDoc; report: ConversionReport } {
  const images: AnnotationImage[] = []
  const seen = new Set<string>()
  let kept = 0
  let dropped = 0
  records.forEach((entry, index) => {
    const rec = asRecord(entry, index)
    const id = basename(rec.filename, extname(rec.filename))
    if (!ID_PATTERN.test(id)) {
      throw new DatasetError(`entry ${rec.filename}: id ${JSON.stringify(id)} is not filename-safe`)
    }
    if (seen.has(id)) {
      throw new DatasetError(`entry ${rec.filename}: duplicate id ${JSON.stringify(id)}`)
    }
    seen.add(id)
    const lines: number[][] = []
    rec.lines.forEach((row, rowIndex) => {
      if (!Array.isArray(row) || row.length !== 4 || row.some(v => typeof v !== 'number' || !Number.isFinite(v))) {
        throw new DatasetError(`entry ${rec.filename}: line ${rowIndex} must be [x1, y1, x2, y2]`)
      }
      const [x1, y1, x2, y2] = row
      for (const x of [x1, x2]) {
        if (x < 0 || x > rec.width) {
          throw new DatasetError(`entry ${rec.filename}: x coordinate ${x} outside [0, ${rec.width}]`)
        }
      }
      for (const y of [y1, y2]) {
        if (y < 0 || y > rec.height) {
          throw new DatasetError(`entry ${rec.filename}: y coordinate ${y} outside [0, ${rec.height}]`)
        }
      }
      if (x1 === x2 && y1 === y2) {
        dropped += 1
        return
      }
      lines.push([x1, y1, x2, y2])
      kept += 1
    })
    images.push({ id, width: rec.width, height: rec.height, lines })
  })
  return {
    doc: { images },
    report: { images: images.length, lines: kept, droppedZeroLength: dropped },
  }
}

export function convertDatasetFile(srcPath: string, outPath: string): ConversionReport {
  let text: string
  try {
    text = readFileSync(srcPath, 'utf-8')
  } catch (e) {
    throw new DatasetError(`cannot read ${srcPath}: ${(e as Error).message}`)
  }
  let parsed: unknown
  try {
    parsed = JSON.parse(text)
  } catch (e) {
    throw new DatasetError(`${srcPath}: not valid JSON: ${(e as Error).message}`)
  }
  if (!Array.isArray(parsed)) {
    throw new DatasetError(`${srcPath}: expected a JSON array of image records`)
  }
  const { doc, report } = convertDataset(parsed)
  writeFileSync(outPath, JSON.stringify(doc, null, 2) + '\n')
  return report
}
