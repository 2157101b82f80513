/**
 * Binary tensor container shared with the engine, byte-compatible with its
 * reader and writer.  Layout (little-endian):
 *
 *   offset  size       field
 *   0       8          magic "MLSDTNSR"
 *   8       1          version = 1
 *   9       1          ndim, 1..4
 *   10      2          reserved, zero
 *   12      4 * ndim   dims, uint32
 *   ...     4 * prod   float32 payload, row-major
 */

import { readFileSync, writeFileSync } from 'node:fs'

export const TENSOR_MAGIC = 'MLSDTNSR'
export const TENSOR_VERSION = 1
export const MAX_NDIM = 4

export class TensorFormatError extends Error {}
export class TensorMagicError extends TensorFormatError {}
export class TensorVersionError extends TensorFormatError {}
export class TensorDimError extends TensorFormatError {}
export class TensorPayloadError extends TensorFormatError {}

export interface Tensor {
  dims: number[]
  /** row-major values, length = product of dims */
  data: Float32Array
}

export function tensorElementCount(dims: number[]): number {
  return dims.reduce((a, b) => a * b, 1)
}

export function encodeTensor(tensor: Tensor): Buffer {
  const { dims, data } = tensor
  if (dims.length < 1 || dims.length > MAX_NDIM) {
    throw new TensorDimError(`tensor rank must be 1..${MAX_NDIM}, got ${dims.length}`)
  }
  if (dims.some(d => !Number.isInteger(d) || d <= 0)) {
    throw new TensorDimError(`tensor dims must be positive integers, got ${dims}`)
  }
  const count = tensorElementCount(dims)
  if (data.length !== count) {
    throw new TensorPayloadError(`payload has ${data.length} values, dims need ${count}`)
  }
  const out = Buffer.alloc(12 + 4 * dims.length + 4 * count)
  out.write(TENSOR_MAGIC, 0, 'ascii')
  out.writeUInt8(TENSOR_VERSION, 8)
  out.writeUInt8(dims.length, 9)
  // bytes 10..11 stay zero (reserved)
  dims.forEach((d, i) => out.writeUInt32LE(d, 12 + 4 * i))
  const base = 12 + 4 * dims.length
  for (let i = 0; i < count; i++) {
    out.writeFloatLE(data[i], base + 4 * i)
  }
  return out
}

export function decodeTensor(buf: Buffer): Tensor {
  if (buf.length < 12) {
    throw new TensorPayloadError(`file too short for a header: ${buf.length} bytes`)
  }
  if (buf.toString('ascii', 0, 8) !== TENSOR_MAGIC) {
    throw new TensorMagicError(`bad magic ${JSON.stringify(buf.toString('latin1', 0, 8))}`)
  }
  const version = buf.readUInt8(8)
  if (version !== TENSOR_VERSION) {
    throw new TensorVersionError(`unsupported version ${version}`)
  }
  const ndim = buf.readUInt8(9)
  if (ndim < 1 || ndim > MAX_NDIM) {
    throw new TensorDimError(`tensor rank must be 1..${MAX_NDIM}, got ${ndim}`)
  }
  if (buf.readUInt16LE(10) !== 0) {
    throw new TensorFormatError('reserved bytes must be zero')
  }
  if (buf.length < 12 + 4 * ndim) {
    throw new TensorPayloadError('file too short for the dims block')
  }
  const dims: number[] = []
  for (let i = 0; i < ndim; i++) {
    dims.push(buf.readUInt32LE(12 + 4 * i))
  }
  if (dims.some(d => d === 0)) {
    throw new TensorDimError(`tensor dims must be positive, got ${dims}`)
  }
  const count = tensorElementCount(dims)
  const expected = 12 + 4 * ndim + 4 * count
  if (buf.length !== expected) {
    throw new TensorPayloadError(`payload size mismatch: expected ${expected} bytes, file has ${buf.length}`)
  }
  const data = new Float32Array(count)
  const base = 12 + 4 * ndim
  for (let i = 0; i < count; i++) {
    data[i] = buf.readFloatLE(base + 4 * i)
  }
  return { dims, data }
}

export function readTensorFile(path: string): Tensor {
  return decodeTensor(readFileSync(path))
}

export function writeTensorFile(tensor: Tensor, path: string): void {
  writeFileSync(path, encodeTensor(tensor))
}
