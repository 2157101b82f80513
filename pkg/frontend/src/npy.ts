/**
 * Minimal .npy reader for C-ordered little-endian float arrays, enough to
 * lift model output dumps into the tensor container.
 */

import { readFileSync } from 'node:fs'
import type { Tensor } from './tensorFile.js'

const NPY_MAGIC = '\x93NUMPY'

export class NpyFormatError extends Error {}

export function decodeNpy(buf: Buffer): Tensor {
  if (buf.length < 10 || buf.toString('latin1', 0, 6) !== NPY_MAGIC) {
    throw new NpyFormatError('not an npy file')
  }
  const major = buf.readUInt8(6)
  let headerLen: number
  let headerStart: number
  if (major === 1) {
    headerLen = buf.readUInt16LE(8)
    headerStart = 10
  } else if (major === 2 || major === 3) {
    headerLen = buf.readUInt32LE(8)
    headerStart = 12
  } else {
    throw new NpyFormatError(`unsupported npy version ${major}`)
  }
  const header = buf.toString('latin1', headerStart, headerStart + headerLen)
  const descr = /'descr':\s*'([^']+)'/.exec(header)?.[1]
  const fortran = /'fortran_order':\s*(True|False)/.exec(header)?.[1]
  const shapeText = /'shape':\s*\(([^)]*)\)/.exec(header)?.[1]
  if (!descr || !fortran || shapeText === undefined) {
    throw new NpyFormatError(`cannot parse npy header: ${header.trim()}`)
  }
  if (fortran === 'True') {
    throw new NpyFormatError('fortran-ordered arrays are not supported')
  }
  const dims = shapeText
    .split(',')
    .map(s => s.trim())
    .filter(s => s.length > 0)
    .map(Number)
  if (dims.some(d => !Number.isInteger(d) || d <= 0)) {
    throw new NpyFormatError(`bad shape (${shapeText})`)
  }
  const count = dims.reduce((a, b) => a * b, 1)
  const body = headerStart + headerLen
  const data = new Float32Array(count)
  if (descr === '<f4') {
    if (buf.length !== body + 4 * count) {
      throw new NpyFormatError('npy payload size mismatch')
    }
    for (let i = 0; i < count; i++) data[i] = buf.readFloatLE(body + 4 * i)
  } else if (descr === '<f8') {
    if (buf.length !== body + 8 * count) {
      throw new NpyFormatError('npy payload size mismatch')
    }
    for (let i = 0; i < count; i++) data[i] = Math.fround(buf.readDoubleLE(body + 8 * i))
  } else {
    throw new NpyFormatError(`unsupported dtype ${descr}; need <f4 or <f8`)
  }
  return { dims, data }
}

export function readNpyFile(path: string): Tensor {
  return decodeNpy(readFileSync(path))
}
