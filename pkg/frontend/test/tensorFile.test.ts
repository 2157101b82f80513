import { describe, expect, it } from 'vitest'
import {
  TensorDimError,
  TensorFormatError,
  TensorMagicError,
  TensorPayloadError,
  TensorVersionError,
  decodeTensor,
  encodeTensor,
} from '../src/tensorFile.js'

function sample(): Buffer {
  return encodeTensor({ dims: [1, 2, 2], data: new Float32Array([1, 2, 3, 4]) })
}

describe('tensor container', () => {
  it('writes the documented 40-byte layout', () => {
    const buf = sample()
    expect(buf.length).toBe(40)
    expect(buf.toString('ascii', 0, 8)).toBe('MLSDTNSR')
    expect(buf.readUInt8(8)).toBe(1)
    expect(buf.readUInt8(9)).toBe(3)
    expect(buf.readUInt16LE(10)).toBe(0)
    expect([buf.readUInt32LE(12), buf.readUInt32LE(16), buf.readUInt32LE(20)]).toEqual([1, 2, 2])
    expect(buf.readFloatLE(24)).toBe(1)
    expect(buf.readFloatLE(36)).toBe(4)
  })

  it('round-trips byte-exactly', () => {
    const data = new Float32Array(24).map((_, i) => Math.fround(Math.sin(i) * 100))
    const buf = encodeTensor({ dims: [2, 3, 4], data })
    const back = decodeTensor(buf)
    expect(back.dims).toEqual([2, 3, 4])
    expect(Array.from(back.data)).toEqual(Array.from(data))
    expect(encodeTensor(back).equals(buf)).toBe(true)
  })

  it('rejects malformed input with the documented class', () => {
    const ok = sample()
    const flip = (offset: number, value: number) => {
      const bad = Buffer.from(ok)
      bad.writeUInt8(value, offset)
      return bad
    }
    expect(() => decodeTensor(flip(0, 0x58))).toThrow(TensorMagicError)
    expect(() => decodeTensor(flip(8, 2))).toThrow(TensorVersionError)
    expect(() => decodeTensor(flip(9, 0))).toThrow(TensorDimError)
    expect(() => decodeTensor(flip(9, 5))).toThrow(TensorDimError)
    expect(() => decodeTensor(flip(10, 1))).toThrow(TensorFormatError)
    expect(() => decodeTensor(ok.subarray(0, ok.length - 4))).toThrow(TensorPayloadError)
    expect(() => decodeTensor(Buffer.concat([ok, Buffer.from([0])]))).toThrow(TensorPayloadError)
    expect(() => decodeTensor(ok.subarray(0, 6))).toThrow(TensorPayloadError)
  })

  it('rejects bad shapes on encode', () => {
    expect(() => encodeTensor({ dims: [], data: new Float32Array(0) })).toThrow(TensorDimError)
    expect(() => encodeTensor({ dims: [1, 1, 1, 1, 1], data: new Float32Array(1) })).toThrow(TensorDimError)
    expect(() => encodeTensor({ dims: [2, 2], data: new Float32Array(3) })).toThrow(TensorPayloadError)
  })
})
