/**
 * Minimal VGG19 trunk (through conv5_1) with an independent forward pass.
 *
 * Convolutions are 3x3, stride 1, zero padding 1, each followed by ReLU;
 * max pools are 2x2 stride 2 and drop a trailing odd row/column. All
 * accumulation happens in float64 so the emitted golden activations are
 * limited only by float32 storage rounding.
 */

export interface ConvSpec {
  name: string;
  cIn: number;
  cOut: number;
}

export type LayerSpec = { kind: "conv"; conv: ConvSpec } | { kind: "pool"; name: string };

export const ARCH: LayerSpec[] = [
  { kind: "conv", conv: { name: "conv1_1", cIn: 3, cOut: 64 } },
  { kind: "conv", conv: { name: "conv1_2", cIn: 64, cOut: 64 } },
  { kind: "pool", name: "pool1" },
  { kind: "conv", conv: { name: "conv2_1", cIn: 64, cOut: 128 } },
  { kind: "conv", conv: { name: "conv2_2", cIn: 128, cOut: 128 } },
  { kind: "pool", name: "pool2" },
  { kind: "conv", conv: { name: "conv3_1", cIn: 128, cOut: 256 } },
  { kind: "conv", conv: { name: "conv3_2", cIn: 256, cOut: 256 } },
  { kind: "conv", conv: { name: "conv3_3", cIn: 256, cOut: 256 } },
  { kind: "conv", conv: { name: "conv3_4", cIn: 256, cOut: 256 } },
  { kind: "pool", name: "pool3" },
  { kind: "conv", conv: { name: "conv4_1", cIn: 256, cOut: 512 } },
  { kind: "conv", conv: { name: "conv4_2", cIn: 512, cOut: 512 } },
  { kind: "conv", conv: { name: "conv4_3", cIn: 512, cOut: 512 } },
  { kind: "conv", conv: { name: "conv4_4", cIn: 512, cOut: 512 } },
  { kind: "pool", name: "pool4" },
  { kind: "conv", conv: { name: "conv5_1", cIn: 512, cOut: 512 } },
];

export const CONV_SPECS: ConvSpec[] = ARCH.flatMap((l) =>
  l.kind === "conv" ? [l.conv] : [],
);

/** Taps are named after the ReLU outputs they read. */
export const TAPS = ["relu1_1", "relu2_1", "relu3_1", "relu4_1", "relu4_2", "relu5_1"];

export interface FeatureMap {
  channels: number;
  height: number;
  width: number;
  data: Float64Array; // [c][y][x]
}

export interface ConvWeights {
  kernel: Float32Array; // (cOut, cIn, 3, 3)
  bias: Float32Array; // (cOut,)
}

export function preprocess(
  image: FeatureMap,
  channelMeans: [number, number, number],
  bgr: boolean,
): FeatureMap {
  if (image.channels !== 3) throw new Error("image must have 3 channels");
  const { height: h, width: w } = image;
  const out = new Float64Array(3 * h * w);
  for (let c = 0; c < 3; c++) {
    const src = bgr ? 2 - c : c;
    for (let i = 0; i < h * w; i++) {
      out[c * h * w + i] = image.data[src * h * w + i] * 255.0 - channelMeans[c];
    }
  }
  return { channels: 3, height: h, width: w, data: out };
}

export function convRelu(x: FeatureMap, w: ConvWeights, spec: ConvSpec): FeatureMap {
  const { height: h, width: w_ } = x;
  if (x.channels !== spec.cIn) {
    throw new Error(`${spec.name}: input has ${x.channels} channels, expected ${spec.cIn}`);
  }
  const out = new Float64Array(spec.cOut * h * w_);
  for (let co = 0; co < spec.cOut; co++) {
    const kBase = co * spec.cIn * 9;
    for (let y = 0; y < h; y++) {
      for (let xk = 0; xk < w_; xk++) {
        let acc = w.bias[co];
        for (let ci = 0; ci < spec.cIn; ci++) {
          const plane = ci * h * w_;
          const kk = kBase + ci * 9;
          for (let dy = -1; dy <= 1; dy++) {
            const yy = y + dy;
            if (yy < 0 || yy >= h) continue;
            const row = plane + yy * w_;
            const kRow = kk + (dy + 1) * 3;
            for (let dx = -1; dx <= 1; dx++) {
              const xx = xk + dx;
              if (xx < 0 || xx >= w_) continue;
              acc += w.kernel[kRow + dx + 1] * x.data[row + xx];
            }
          }
        }
        out[co * h * w_ + y * w_ + xk] = acc > 0 ? acc : 0;
      }
    }
  }
  return { channels: spec.cOut, height: h, width: w_, data: out };
}

export function maxPool2x2(x: FeatureMap): FeatureMap {
  const h = Math.floor(x.height / 2);
  const w = Math.floor(x.width / 2);
  const out = new Float64Array(x.channels * h * w);
  for (let c = 0; c < x.channels; c++) {
    for (let y = 0; y < h; y++) {
      for (let xk = 0; xk < w; xk++) {
        const base = c * x.height * x.width + 2 * y * x.width + 2 * xk;
        const m = Math.max(
          x.data[base],
          x.data[base + 1],
          x.data[base + x.width],
          x.data[base + x.width + 1],
        );
        out[c * h * w + y * w + xk] = m;
      }
    }
  }
  return { channels: x.channels, height: h, width: w, data: out };
}

/** Run the trunk, collecting activations at every tap layer. */
export function forwardTaps(
  image: FeatureMap,
  weights: Map<string, ConvWeights>,
  channelMeans: [number, number, number],
  bgr: boolean,
): Map<string, FeatureMap> {
  let h = preprocess(image, channelMeans, bgr);
  const taps = new Map<string, FeatureMap>();
  for (const layer of ARCH) {
    if (layer.kind === "conv") {
      const w = weights.get(layer.conv.name);
      if (!w) throw new Error(`missing weights for ${layer.conv.name}`);
      h = convRelu(h, w, layer.conv);
      const tap = "relu" + layer.conv.name.slice(4);
      if (TAPS.includes(tap)) taps.set(tap, h);
    } else {
      h = maxPool2x2(h);
    }
  }
  return taps;
}
