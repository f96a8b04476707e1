/**
 * Export pipeline: load a VGG19 checkpoint, validate it against the
 * architecture table, write the VGGW weights file, and emit the golden
 * input/activation fixture computed with this package's own forward pass.
 */

import { existsSync, readFileSync } from "node:fs";
import { join } from "node:path";

import {
  ARCH,
  CONV_SPECS,
  ConvWeights,
  FeatureMap,
  forwardTaps,
} from "./vgg19.js";
import {
  CHANNEL_ORDER_BGR,
  CHANNEL_ORDER_RGB,
  NamedTensor,
  VggwFile,
  VggwFormatError,
  readVggw,
  tensorByName,
  writeVggw,
} from "./vggw.js";

export const GOLDEN_SIZE = 64;
export const GOLDEN_SEED = 0x5eed;

export class CheckpointError extends Error {}

/** Deterministic PRNG (mulberry32) so the golden input is reproducible. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function goldenInput(): FeatureMap {
  const rand = mulberry32(GOLDEN_SEED);
  const n = 3 * GOLDEN_SIZE * GOLDEN_SIZE;
  const data = new Float64Array(n);
  // Round to float32 up front so the stored input and the one used for
  // the activations are bit-identical.
  for (let i = 0; i < n; i++) data[i] = Math.fround(rand());
  return { channels: 3, height: GOLDEN_SIZE, width: GOLDEN_SIZE, data };
}

export interface Checkpoint {
  channelOrder: number;
  channelMeans: [number, number, number];
  weights: Map<string, ConvWeights>;
}

function validateShapes(name: string, dims: number[], expected: number[]): void {
  if (
    dims.length !== expected.length ||
    dims.some((d, i) => d !== expected[i])
  ) {
    throw new CheckpointError(
      `${name}: shape [${dims}] does not match VGG19 table [${expected}]`,
    );
  }
}

/** Load from an existing VGGW file (offline/regeneration path). */
export function loadVggwCheckpoint(path: string): Checkpoint {
  const f = readVggw(readFileSync(path));
  const weights = new Map<string, ConvWeights>();
  for (const spec of CONV_SPECS) {
    const k = tensorByName(f, spec.name + ".weight");
    const b = tensorByName(f, spec.name + ".bias");
    validateShapes(spec.name + ".weight", k.dims, [spec.cOut, spec.cIn, 3, 3]);
    validateShapes(spec.name + ".bias", b.dims, [spec.cOut]);
    weights.set(spec.name, { kernel: k.data, bias: b.data });
  }
  return {
    channelOrder: f.channelOrder,
    channelMeans: f.channelMeans,
    weights,
  };
}

interface ManifestLayer {
  name: string;
  shape: number[];
  file: string;
}

interface Manifest {
  channel_order: "rgb" | "bgr";
  channel_means: [number, number, number];
  layers: ManifestLayer[];
}

/**
 * Load from a manifest directory: layers.json plus raw little-endian
 * float32 .bin files, the documented manual-download conversion target
 * for a standard pretrained checkpoint.
 */
export function loadManifestCheckpoint(dir: string): Checkpoint {
  const manifestPath = join(dir, "layers.json");
  if (!existsSync(manifestPath)) {
    throw new CheckpointError(
      `no layers.json in ${dir}; convert a pretrained VGG19 checkpoint to ` +
        `raw float32 .bin files plus a layers.json manifest (see README)`,
    );
  }
  const manifest: Manifest = JSON.parse(readFileSync(manifestPath, "utf-8"));
  const byName = new Map(manifest.layers.map((l) => [l.name, l]));
  const weights = new Map<string, ConvWeights>();
  const readBin = (l: ManifestLayer): Float32Array => {
    const buf = readFileSync(join(dir, l.file));
    const n = l.shape.reduce((a, b) => a * b, 1);
    if (buf.length !== 4 * n) {
      throw new CheckpointError(
        `${l.file}: ${buf.length} bytes but shape [${l.shape}] implies ${4 * n}`,
      );
    }
    const out = new Float32Array(n);
    for (let i = 0; i < n; i++) out[i] = buf.readFloatLE(4 * i);
    return out;
  };
  for (const spec of CONV_SPECS) {
    const k = byName.get(spec.name + ".weight");
    const b = byName.get(spec.name + ".bias");
    if (!k || !b) {
      throw new CheckpointError(`manifest is missing ${spec.name} tensors`);
    }
    validateShapes(k.name, k.shape, [spec.cOut, spec.cIn, 3, 3]);
    validateShapes(b.name, b.shape, [spec.cOut]);
    weights.set(spec.name, { kernel: readBin(k), bias: readBin(b) });
  }
  return {
    channelOrder:
      manifest.channel_order === "bgr" ? CHANNEL_ORDER_BGR : CHANNEL_ORDER_RGB,
    channelMeans: manifest.channel_means,
    weights,
  };
}

export function loadCheckpoint(source: string): Checkpoint {
  if (!existsSync(source)) {
    throw new CheckpointError(
      `checkpoint source ${source} not found; download a pretrained VGG19 ` +
        `checkpoint manually and convert it to a VGGW file or a ` +
        `layers.json manifest directory`,
    );
  }
  if (source.endsWith(".vggw")) return loadVggwCheckpoint(source);
  return loadManifestCheckpoint(source);
}

export function buildWeightsFile(ckpt: Checkpoint): VggwFile {
  const tensors: NamedTensor[] = [];
  for (const spec of CONV_SPECS) {
    const w = ckpt.weights.get(spec.name)!;
    tensors.push({
      name: spec.name + ".weight",
      dims: [spec.cOut, spec.cIn, 3, 3],
      data: w.kernel,
    });
    tensors.push({ name: spec.name + ".bias", dims: [spec.cOut], data: w.bias });
  }
  return {
    channelOrder: ckpt.channelOrder,
    channelMeans: ckpt.channelMeans,
    tensors,
  };
}

export function buildGoldenFile(ckpt: Checkpoint): VggwFile {
  const input = goldenInput();
  const taps = forwardTaps(
    input,
    ckpt.weights,
    ckpt.channelMeans,
    ckpt.channelOrder === CHANNEL_ORDER_BGR,
  );
  const tensors: NamedTensor[] = [
    {
      name: "input",
      dims: [3, GOLDEN_SIZE, GOLDEN_SIZE],
      data: Float32Array.from(input.data),
    },
  ];
  for (const [name, fm] of taps) {
    tensors.push({
      name,
      dims: [fm.channels, fm.height, fm.width],
      data: Float32Array.from(fm.data),
    });
  }
  return {
    channelOrder: ckpt.channelOrder,
    channelMeans: ckpt.channelMeans,
    tensors,
  };
}

export function exportAll(source: string): { weights: Buffer; golden: Buffer } {
  const ckpt = loadCheckpoint(source);
  return {
    weights: writeVggw(buildWeightsFile(ckpt)),
    golden: writeVggw(buildGoldenFile(ckpt)),
  };
}
