/**
 * VGGW binary container: named float32 tensors with per-tensor CRC32.
 *
 * Layout (little-endian):
 *   magic "VGGW" | u32 version=1 | u8 channel_order (0=RGB, 1=BGR)
 *   3 x f32 channel means | u32 tensor count
 *   per tensor: u16 name_len | name (UTF-8) | u8 ndims | u32 dims[]
 *               f32 data[] | u32 crc32(data bytes)
 */

import { crc32 } from "node:zlib";

export const MAGIC = "VGGW";
export const VERSION = 1;
export const CHANNEL_ORDER_RGB = 0;
export const CHANNEL_ORDER_BGR = 1;

export class VggwFormatError extends Error {}

export interface NamedTensor {
  name: string;
  dims: number[];
  data: Float32Array;
}

export interface VggwFile {
  channelOrder: number;
  channelMeans: [number, number, number];
  tensors: NamedTensor[];
}

export function tensorByName(f: VggwFile, name: string): NamedTensor {
  const t = f.tensors.find((t) => t.name === name);
  if (!t) throw new VggwFormatError(`missing tensor ${JSON.stringify(name)}`);
  return t;
}

export function writeVggw(f: VggwFile): Buffer {
  const chunks: Buffer[] = [];
  const head = Buffer.alloc(4 + 4 + 1 + 12 + 4);
  let o = head.write(MAGIC, 0, "ascii");
  o = head.writeUInt32LE(VERSION, o);
  o = head.writeUInt8(f.channelOrder, o);
  for (const m of f.channelMeans) o = head.writeFloatLE(m, o);
  head.writeUInt32LE(f.tensors.length, o);
  chunks.push(head);
  for (const t of f.tensors) {
    const name = Buffer.from(t.name, "utf-8");
    const meta = Buffer.alloc(2 + name.length + 1 + 4 * t.dims.length);
    let p = meta.writeUInt16LE(name.length, 0);
    p += name.copy(meta, p);
    p = meta.writeUInt8(t.dims.length, p);
    for (const d of t.dims) p = meta.writeUInt32LE(d, p);
    const expected = t.dims.reduce((a, b) => a * b, 1);
    if (t.data.length !== expected) {
      throw new VggwFormatError(
        `tensor ${t.name}: ${t.data.length} values but dims imply ${expected}`,
      );
    }
    const data = Buffer.alloc(4 * t.data.length);
    for (let i = 0; i < t.data.length; i++) data.writeFloatLE(t.data[i], 4 * i);
    const crc = Buffer.alloc(4);
    crc.writeUInt32LE(crc32(data) >>> 0, 0);
    chunks.push(meta, data, crc);
  }
  return Buffer.concat(chunks);
}

class Reader {
  private pos = 0;
  constructor(private buf: Buffer) {}
  take(n: number): Buffer {
    if (this.pos + n > this.buf.length) {
      throw new VggwFormatError(
        `truncated file: wanted ${n} bytes at offset ${this.pos}`,
      );
    }
    const out = this.buf.subarray(this.pos, this.pos + n);
    this.pos += n;
    return out;
  }
}

export function readVggw(buf: Buffer): VggwFile {
  const r = new Reader(buf);
  const magic = r.take(4).toString("ascii");
  if (magic !== MAGIC) {
    throw new VggwFormatError(`bad magic ${JSON.stringify(magic)}`);
  }
  const version = r.take(4).readUInt32LE(0);
  if (version !== VERSION) {
    throw new VggwFormatError(`unsupported version ${version}`);
  }
  const channelOrder = r.take(1).readUInt8(0);
  const meansBuf = r.take(12);
  const channelMeans: [number, number, number] = [
    meansBuf.readFloatLE(0),
    meansBuf.readFloatLE(4),
    meansBuf.readFloatLE(8),
  ];
  const count = r.take(4).readUInt32LE(0);
  const tensors: NamedTensor[] = [];
  for (let i = 0; i < count; i++) {
    const nameLen = r.take(2).readUInt16LE(0);
    const name = r.take(nameLen).toString("utf-8");
    const ndims = r.take(1).readUInt8(0);
    const dims: number[] = [];
    for (let d = 0; d < ndims; d++) dims.push(r.take(4).readUInt32LE(0));
    const n = dims.reduce((a, b) => a * b, 1);
    const data = r.take(4 * n);
    const crc = r.take(4).readUInt32LE(0);
    if (((crc32(data) >>> 0) !== crc)) {
      throw new VggwFormatError(`CRC mismatch for tensor ${JSON.stringify(name)}`);
    }
    const arr = new Float32Array(n);
    for (let j = 0; j < n; j++) arr[j] = data.readFloatLE(4 * j);
    tensors.push({ name, dims, data: arr });
  }
  return { channelOrder, channelMeans, tensors };
}
