/**
 * Architecture builders with named capture points.
 *
 * Each model is a plain list of conv/pool steps executed with direct tfjs
 * ops; parameters come from a seeded generator keyed by (model id, step), so
 * repeated runs produce bit-identical activations. Activations are captured
 * post-nonlinearity; appending ":pre" to a requested capture name returns the
 * pre-nonlinearity tensor of the same convolution.
 */

import * as tf from "@tensorflow/tfjs";

import type { Shape3 } from "./archive.js";
import { findModel, type ModelRegistryEntry } from "./registry.js";
import { hashSeed, seededNormals } from "./prng.js";

export interface CapturePoint {
  name: string;
  index: number;
}

interface ConvStep {
  kind: "conv";
  capture: string;
  filters: number;
  kernel: number;
  stride: number;
  pad: number;
}

interface PoolStep {
  kind: "pool";
  capture: string;
  size: number;
  stride: number;
}

type Step = ConvStep | PoolStep;

const conv = (capture: string, filters: number, kernel: number, stride = 1, pad = 1): ConvStep => ({
  kind: "conv",
  capture,
  filters,
  kernel,
  stride,
  pad,
});
const pool = (capture: string, size = 2, stride = 2): PoolStep => ({ kind: "pool", capture, size, stride });

const STACKS: Record<string, Step[]> = {
  alexnet: [
    conv("relu1", 64, 11, 4, 2),
    pool("pool1", 3, 2),
    conv("relu2", 192, 5, 1, 2),
    pool("pool2", 3, 2),
    conv("relu3", 384, 3, 1, 1),
    conv("relu4", 256, 3, 1, 1),
    conv("relu5", 256, 3, 1, 1),
    pool("pool5", 3, 2),
  ],
  vgg16: [
    conv("relu1_1", 64, 3),
    conv("relu1_2", 64, 3),
    pool("pool1"),
    conv("relu2_1", 128, 3),
    conv("relu2_2", 128, 3),
    pool("pool2"),
    conv("relu3_1", 256, 3),
    conv("relu3_2", 256, 3),
    conv("relu3_3", 256, 3),
    pool("pool3"),
    conv("relu4_1", 512, 3),
    conv("relu4_2", 512, 3),
    conv("relu4_3", 512, 3),
    pool("pool4"),
    conv("relu5_1", 512, 3),
    conv("relu5_2", 512, 3),
    conv("relu5_3", 512, 3),
    pool("pool5"),
  ],
  tiny3: [
    conv("relu1", 8, 3, 1, 1),
    pool("pool1"),
    conv("relu2", 16, 3, 1, 1),
    pool("pool2"),
  ],
};

export class CaptureModel {
  private kernels = new Map<string, tf.Tensor4D>();

  constructor(
    readonly entry: ModelRegistryEntry,
    private steps: Step[],
  ) {}

  /** Ordered capture points; "input" is always present at index 0. */
  capturePoints(): CapturePoint[] {
    const points: CapturePoint[] = [{ name: "input", index: 0 }];
    this.steps.forEach((step, i) => points.push({ name: step.capture, index: i + 1 }));
    return points;
  }

  private kernel(stepIndex: number, step: ConvStep, inChannels: number): tf.Tensor4D {
    const key = `${stepIndex}:${inChannels}`;
    let cached = this.kernels.get(key);
    if (!cached) {
      const fanIn = step.kernel * step.kernel * inChannels;
      const scale = Math.sqrt(2.0 / fanIn); // He init for relu stacks
      const seed = hashSeed(`${this.entry.model_id}/step${stepIndex}`);
      const values = seededNormals(step.kernel * step.kernel * inChannels * step.filters, seed, scale);
      // keep: kernels are created lazily inside forward's tidy scope but must
      // survive it, since they are reused for every image
      cached = tf.keep(tf.tensor4d(values, [step.kernel, step.kernel, inChannels, step.filters]));
      this.kernels.set(key, cached);
    }
    return cached;
  }

  /**
   * Run one (H, W, C) image through the stack, returning the requested
   * capture tensors keyed by name. Unknown names raise, listing the options.
   */
  forward(input: tf.Tensor3D, captures: string[]): Map<string, tf.Tensor3D> {
    const wanted = new Map<string, { name: string; pre: boolean }>();
    const known = new Set(this.steps.map((s) => s.capture));
    for (const raw of captures) {
      const pre = raw.endsWith(":pre");
      const base = pre ? raw.slice(0, -4) : raw;
      if (base === "input") continue; // handled by the caller from the preprocessed pixels
      if (!known.has(base)) {
        throw new Error(
          `layer "${raw}" does not resolve to a capture point of ${this.entry.model_id} ` +
            `(available: input, ${[...known].join(", ")})`,
        );
      }
      if (pre) {
        const step = this.steps.find((s) => s.capture === base)!;
        if (step.kind !== "conv") throw new Error(`layer "${base}" has no pre-nonlinearity variant`);
      }
      wanted.set(raw, { name: base, pre });
    }

    const out = new Map<string, tf.Tensor3D>();
    tf.tidy(() => {
      let x = input.expandDims(0) as tf.Tensor4D;
      this.steps.forEach((step, i) => {
        let preAct: tf.Tensor4D | null = null;
        if (step.kind === "conv") {
          const w = this.kernel(i, step, x.shape[3] as number);
          preAct = tf.conv2d(x, w, step.stride, step.pad);
          x = tf.relu(preAct);
        } else {
          x = tf.maxPool(x, step.size, step.stride, 0);
        }
        for (const [raw, spec] of wanted) {
          if (spec.name !== step.capture) continue;
          const source = spec.pre ? preAct! : x;
          out.set(raw, tf.keep(source.squeeze([0]) as tf.Tensor3D));
        }
      });
    });
    return out;
  }

  /** Output shape of every capture point for a given input size, by running once. */
  layerShapes(height: number, width: number): Map<string, Shape3> {
    const zeros = tf.zeros([height, width, 3]) as tf.Tensor3D;
    const names = this.steps.map((s) => s.capture);
    const tensors = this.forward(zeros, names);
    const shapes = new Map<string, Shape3>();
    shapes.set("input", [height, width, 3]);
    for (const [name, tensor] of tensors) {
      shapes.set(name, tensor.shape as Shape3);
      tensor.dispose();
    }
    zeros.dispose();
    return shapes;
  }

  dispose(): void {
    for (const kernel of this.kernels.values()) kernel.dispose();
    this.kernels.clear();
  }
}

export function buildModel(modelId: string): CaptureModel {
  const entry = findModel(modelId);
  if (!entry.builder) {
    throw new Error(
      `model "${modelId}" has no built-in architecture; convert the published ` +
        `checkpoint (source: ${entry.source}) to a local bundle to run it`,
    );
  }
  return new CaptureModel(entry, STACKS[entry.builder]);
}
