/**
 * Extractor CLI.
 *
 *   list-models
 *   list-layers --model <id> [--height H] [--width W]
 *   extract --model <id> --images <manifest> --layers <names|default> --out <dir>
 *
 * Exit codes: 0 success, 1 usage error, 2 data error.
 */

import { pathToFileURL } from "node:url";

import * as tf from "@tensorflow/tfjs";

import { extractFeatures, readImageManifest } from "./extract.js";
import { buildModel } from "./models.js";
import { findModel, listModels } from "./registry.js";

class UsageError extends Error {}

function parseFlags(argv: string[], allowed: Set<string>): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    if (!flag.startsWith("--") || !allowed.has(flag)) throw new UsageError(`unknown flag ${flag}`);
    const value = argv[i + 1];
    if (value === undefined) throw new UsageError(`flag ${flag} needs a value`);
    flags.set(flag.slice(2), value);
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) throw new UsageError(`--${name} is required`);
  return value;
}

function cmdListModels(): number {
  const rows = listModels();
  const width = Math.max(...rows.map((r) => r.model_id.length));
  for (const row of rows) {
    const top1 = row.imagenet_top1 === null ? "  -  " : row.imagenet_top1.toFixed(1) + "%";
    const runnable = row.builder ? `builder:${row.builder}` : "needs local bundle";
    console.log(
      `${row.model_id.padEnd(width)}  ${row.architecture.padEnd(16)} ${row.training.padEnd(18)} ` +
        `${row.training_data.padEnd(12)} top1=${top1}  ${runnable}  [${row.source}]`,
    );
  }
  return 0;
}

async function cmdListLayers(argv: string[]): Promise<number> {
  const flags = parseFlags(argv, new Set(["--model", "--height", "--width"]));
  const entry = findModel(required(flags, "model"));
  const height = Number(flags.get("height") ?? entry.declared_input[0]);
  const width = Number(flags.get("width") ?? entry.declared_input[1]);
  if (!Number.isInteger(height) || !Number.isInteger(width) || height < 1 || width < 1) {
    throw new UsageError("--height/--width must be positive integers");
  }
  await tf.ready();
  const model = buildModel(entry.model_id);
  try {
    const shapes = model.layerShapes(height, width);
    for (const point of model.capturePoints()) {
      const shape = shapes.get(point.name)!;
      const mark = entry.default_layers.includes(point.name) || point.name === "input" ? "*" : " ";
      console.log(`${String(point.index).padStart(3)}  ${mark} ${point.name.padEnd(12)} (${shape.join(", ")})`);
    }
    console.log("* = in the model's default capture set");
  } finally {
    model.dispose();
  }
  return 0;
}

async function cmdExtract(argv: string[]): Promise<number> {
  const flags = parseFlags(argv, new Set(["--model", "--images", "--layers", "--out"]));
  const modelId = required(flags, "model");
  const images = readImageManifest(required(flags, "images"));
  const layersValue = flags.get("layers") ?? "default";
  const layers =
    layersValue === "default" ? ("default" as const) : layersValue.split(",").map((s) => s.trim());
  const out = required(flags, "out");
  const manifest = await extractFeatures({ modelId, images, layers }, out);
  console.log(
    `wrote ${out}: ${manifest.images.length} images x ${manifest.layers.length} layers (${manifest.model_id})`,
  );
  return 0;
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    switch (command) {
      case "list-models":
        return cmdListModels();
      case "list-layers":
        return await cmdListLayers(rest);
      case "extract":
        return await cmdExtract(rest);
      default:
        throw new UsageError(
          `usage: extractor <list-models | list-layers --model <id> | ` +
            `extract --model <id> --images <manifest> --layers <names|default> --out <dir>>`,
        );
    }
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

const isEntryPoint =
  process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href;
if (isEntryPoint) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}
