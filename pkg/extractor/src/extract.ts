/**
 * Extraction jobs: run a registry model over an image list and write the
 * activations, plus the preprocessed input, as a feature archive.
 *
 * Extraction is deterministic (inference only, seeded parameters, no
 * augmentation): running the same job twice produces byte-identical archives.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { ArchiveWriter, type ArchiveManifest, type Shape3 } from "./archive.js";
import { buildModel } from "./models.js";
import { decodeImageFile, preprocess } from "./preprocess.js";
import { describePreprocessing, findModel } from "./registry.js";

export interface ImageRef {
  imageId: string;
  path: string;
}

export interface ExtractionJob {
  modelId: string;
  images: ImageRef[];
  /** capture names, or "default" for the registry's documented layer set */
  layers: string[] | "default";
}

/**
 * Parse an image manifest: one image per line, either "<image_id> <path>" or
 * a bare path whose stem becomes the id. Relative paths resolve against the
 * manifest's own directory.
 */
export function readImageManifest(manifestPath: string): ImageRef[] {
  const base = path.dirname(path.resolve(manifestPath));
  const refs: ImageRef[] = [];
  const text = fs.readFileSync(manifestPath, "utf-8");
  for (const rawLine of text.split("\n")) {
    const line = rawLine.trim();
    if (!line || line.startsWith("#")) continue;
    const parts = line.split(/\s+/);
    const [imageId, imagePath] =
      parts.length >= 2
        ? [parts[0], parts.slice(1).join(" ")]
        : [path.parse(parts[0]).name, parts[0]];
    refs.push({
      imageId,
      path: path.isAbsolute(imagePath) ? imagePath : path.join(base, imagePath),
    });
  }
  return refs;
}

export async function extractFeatures(job: ExtractionJob, outRoot: string): Promise<ArchiveManifest> {
  if (job.images.length === 0) throw new Error("no images in job");
  await tf.ready(); // the first op in a fresh process races backend setup otherwise
  const entry = findModel(job.modelId);
  const layers = job.layers === "default" ? entry.default_layers : job.layers;
  const model = buildModel(job.modelId);
  try {
    const points = model.capturePoints();
    const indexOf = new Map(points.map((p) => [p.name, p.index]));
    const captures = layers.filter((name) => name !== "input");
    const ordered = [...new Set(captures)].sort(
      (a, b) => (indexOf.get(a.replace(/:pre$/, "")) ?? 0) - (indexOf.get(b.replace(/:pre$/, "")) ?? 0),
    );

    const writer = new ArchiveWriter(outRoot, entry.model_id, describePreprocessing(entry));
    let declared = false;
    for (const image of job.images) {
      const decoded = decodeImageFile(image.path);
      const input = preprocess(decoded, entry.preprocessing);
      const tensors = model.forward(input, ordered);
      try {
        if (!declared) {
          writer.declareLayer("input", 0, input.shape as Shape3);
          for (const name of ordered) {
            const tensor = tensors.get(name)!;
            writer.declareLayer(name, indexOf.get(name.replace(/:pre$/, ""))!, tensor.shape as Shape3);
          }
          declared = true;
        }
        writer.addImage(image.imageId, image.path);
        writeTensor(writer, image.imageId, "input", input);
        for (const name of ordered) {
          writeTensor(writer, image.imageId, name, tensors.get(name)!);
        }
      } finally {
        input.dispose();
        for (const tensor of tensors.values()) tensor.dispose();
      }
    }
    return writer.finish();
  } finally {
    model.dispose();
  }
}

function writeTensor(writer: ArchiveWriter, imageId: string, layer: string, tensor: tf.Tensor3D): void {
  const values = tensor.dataSync() as Float32Array;
  try {
    writer.writeTensor(imageId, layer, values, tensor.shape as Shape3);
  } catch (err) {
    // shape drift between images surfaces as a manifest-shape mismatch
    throw new Error(`${(err as Error).message} (shape drift or corrupt input?)`);
  }
}
