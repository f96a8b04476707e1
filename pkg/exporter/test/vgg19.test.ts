import assert from "node:assert/strict";
import { describe, it } from "node:test";

import {
  ConvSpec,
  FeatureMap,
  convRelu,
  maxPool2x2,
  preprocess,
} from "../src/vgg19.js";

function fm(channels: number, height: number, width: number, values: number[]): FeatureMap {
  return { channels, height, width, data: Float64Array.from(values) };
}

describe("preprocess", () => {
  it("scales to 0-255 and subtracts per-channel means", () => {
    const img = fm(3, 1, 1, [0.1, 0.5, 1.0]);
    const out = preprocess(img, [10, 20, 30], false);
    assert.deepEqual(Array.from(out.data), [0.1 * 255 - 10, 0.5 * 255 - 20, 1.0 * 255 - 30]);
  });

  it("flips channel order when the network is BGR", () => {
    const img = fm(3, 1, 1, [0.1, 0.5, 1.0]);
    const out = preprocess(img, [0, 0, 0], true);
    assert.deepEqual(Array.from(out.data), [255, 0.5 * 255, 0.1 * 255]);
  });
});

describe("convRelu", () => {
  const spec: ConvSpec = { name: "t", cIn: 1, cOut: 1 };

  it("matches a hand-computed 2x2 example with zero padding", () => {
    // Image [[1, 2], [3, 4]], kernel all ones, bias 0: each output is the
    // sum of the in-bounds 3x3 neighborhood, so every output equals 10.
    const x = fm(1, 2, 2, [1, 2, 3, 4]);
    const w = { kernel: Float32Array.from(Array(9).fill(1)), bias: Float32Array.from([0]) };
    const y = convRelu(x, w, spec);
    assert.deepEqual(Array.from(y.data), [10, 10, 10, 10]);
  });

  it("applies an asymmetric kernel in the documented orientation", () => {
    // Kernel with a single 1 at position (dy=-1, dx=-1) shifts the image
    // down-right; output(y, x) = input(y-1, x-1).
    const x = fm(1, 2, 2, [1, 2, 3, 4]);
    const k = new Float32Array(9);
    k[0] = 1;
    const y = convRelu(x, { kernel: k, bias: Float32Array.from([0]) }, spec);
    assert.deepEqual(Array.from(y.data), [0, 0, 0, 1]);
  });

  it("adds bias and clamps negatives to zero", () => {
    const x = fm(1, 1, 1, [2]);
    const k = new Float32Array(9);
    k[4] = -3; // center tap
    const y = convRelu(x, { kernel: k, bias: Float32Array.from([1]) }, spec);
    assert.deepEqual(Array.from(y.data), [0]); // relu(-6 + 1)
  });

  it("sums over input channels", () => {
    const x = fm(2, 1, 1, [3, 5]);
    const k = new Float32Array(18);
    k[4] = 1; // channel 0 center
    k[13] = 10; // channel 1 center
    const y = convRelu(
      x,
      { kernel: k, bias: Float32Array.from([0]) },
      { name: "t", cIn: 2, cOut: 1 },
    );
    assert.deepEqual(Array.from(y.data), [53]);
  });
});

describe("maxPool2x2", () => {
  it("takes the max of each 2x2 block", () => {
    const x = fm(1, 2, 4, [1, 5, 2, 0, 3, 4, 8, 7]);
    const y = maxPool2x2(x);
    assert.equal(y.height, 1);
    assert.equal(y.width, 2);
    assert.deepEqual(Array.from(y.data), [5, 8]);
  });

  it("drops a trailing odd row and column", () => {
    const x = fm(1, 3, 3, [1, 2, 9, 3, 4, 9, 9, 9, 9]);
    const y = maxPool2x2(x);
    assert.equal(y.height, 1);
    assert.equal(y.width, 1);
    assert.deepEqual(Array.from(y.data), [4]);
  });
});
