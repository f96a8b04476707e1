import assert from "node:assert/strict";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { before, describe, it } from "node:test";
import { fileURLToPath } from "node:url";

import {
  CheckpointError,
  GOLDEN_SIZE,
  exportAll,
  goldenInput,
  loadCheckpoint,
  loadManifestCheckpoint,
  mulberry32,
} from "../src/export.js";
import { TAPS } from "../src/vgg19.js";
import { readVggw, tensorByName } from "../src/vggw.js";

// Compiled test location is <exporter>/dist/test/, so the repository root
// holding src/splatstyle/data/ sits three levels up.
const WEIGHTS_PATH = fileURLToPath(
  new URL("../../../src/splatstyle/data/vgg19.vggw", import.meta.url),
);

const TAP_DIMS: Record<string, number[]> = {
  relu1_1: [64, 64, 64],
  relu2_1: [128, 32, 32],
  relu3_1: [256, 16, 16],
  relu4_1: [512, 8, 8],
  relu4_2: [512, 8, 8],
  relu5_1: [512, 4, 4],
};

describe("golden input", () => {
  it("is deterministic and in [0, 1)", () => {
    const a = goldenInput();
    const b = goldenInput();
    assert.deepEqual(Array.from(a.data), Array.from(b.data));
    assert.ok(Math.min(...a.data) >= 0);
    assert.ok(Math.max(...a.data) < 1);
    assert.equal(a.data.length, 3 * GOLDEN_SIZE * GOLDEN_SIZE);
  });

  it("prng produces a stable stream", () => {
    const r = mulberry32(1);
    const first = [r(), r(), r()];
    const r2 = mulberry32(1);
    assert.deepEqual([r2(), r2(), r2()], first);
  });
});

describe("checkpoint loading", () => {
  it("reads the committed weights and finds the VGG19 first conv shape", () => {
    const ckpt = loadCheckpoint(WEIGHTS_PATH);
    const w = ckpt.weights.get("conv1_1")!;
    assert.equal(w.kernel.length, 64 * 3 * 3 * 3);
    assert.equal(w.bias.length, 64);
    const raw = readVggw(readFileSync(WEIGHTS_PATH));
    assert.deepEqual(tensorByName(raw, "conv1_1.weight").dims, [64, 3, 3, 3]);
  });

  it("explains the manual path when the source is missing", () => {
    assert.throws(
      () => loadCheckpoint("/nonexistent/vgg19.pth"),
      /download a pretrained VGG19 checkpoint manually/,
    );
  });

  it("rejects a manifest with a wrong layer shape", () => {
    const dir = mkdtempSync(join(tmpdir(), "ckpt-"));
    const bad = {
      channel_order: "rgb",
      channel_means: [123.68, 116.779, 103.939],
      layers: [
        { name: "conv1_1.weight", shape: [64, 3, 5, 5], file: "w.bin" },
        { name: "conv1_1.bias", shape: [64], file: "b.bin" },
      ],
    };
    writeFileSync(join(dir, "layers.json"), JSON.stringify(bad));
    assert.throws(() => loadManifestCheckpoint(dir), CheckpointError);
    assert.throws(() => loadManifestCheckpoint(dir), /does not match VGG19 table/);
  });

  it("requires layers.json in a manifest directory", () => {
    const dir = mkdtempSync(join(tmpdir(), "ckpt-"));
    assert.throws(() => loadManifestCheckpoint(dir), /layers\.json/);
  });
});

describe("full export", () => {
  let weights: Buffer;
  let golden: Buffer;

  before(() => {
    ({ weights, golden } = exportAll(WEIGHTS_PATH));
  });

  it("written weights file passes CRC validation and keeps every conv", () => {
    const f = readVggw(weights);
    assert.equal(f.tensors.length, 26); // 13 conv layers through conv5_1 x (weight, bias)
    assert.deepEqual(tensorByName(f, "conv5_1.weight").dims, [512, 512, 3, 3]);
  });

  it("golden file holds the input plus all six tap activations", () => {
    const f = readVggw(golden);
    assert.deepEqual(tensorByName(f, "input").dims, [3, GOLDEN_SIZE, GOLDEN_SIZE]);
    for (const tap of TAPS) {
      assert.deepEqual(tensorByName(f, tap).dims, TAP_DIMS[tap]);
    }
    // ReLU outputs are nonnegative and not identically zero.
    const r5 = tensorByName(f, "relu5_1").data;
    let min = Infinity;
    let max = -Infinity;
    for (const v of r5) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
    assert.ok(min >= 0);
    assert.ok(max > 0);
  });

  it("export is deterministic given the checkpoint bytes", () => {
    const again = exportAll(WEIGHTS_PATH);
    assert.ok(again.weights.equals(weights));
    assert.ok(again.golden.equals(golden));
  });
});
