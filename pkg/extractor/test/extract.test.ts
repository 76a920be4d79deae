import { execFileSync, spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterAll, describe, expect, it } from "vitest";

import { extractFeatures, readImageManifest } from "../src/extract.js";
import { payloadPath } from "../src/archive.js";
import { decodeImageFile, preprocess } from "../src/preprocess.js";
import { findModel } from "../src/registry.js";
import { writeTempImages } from "./helpers.js";

const scratch = fs.mkdtempSync(path.join(os.tmpdir(), "extract-"));
afterAll(() => fs.rmSync(scratch, { recursive: true, force: true }));

function archiveBytes(root: string): Map<string, Buffer> {
  const files = new Map<string, Buffer>();
  const walk = (dir: string) => {
    for (const name of fs.readdirSync(dir)) {
      const full = path.join(dir, name);
      if (fs.statSync(full).isDirectory()) walk(full);
      else files.set(path.relative(root, full), fs.readFileSync(full));
    }
  };
  walk(root);
  return files;
}

describe("extractFeatures", () => {
  const images = writeTempImages(path.join(scratch, "images"), 3, "bmp");

  it("writes one payload per image and layer, plus the input tensors", async () => {
    const out = path.join(scratch, "arc1");
    const manifest = await extractFeatures(
      { modelId: "tiny3-dev", images: images.slice(0, 2), layers: ["relu1", "pool1", "pool2"] },
      out,
    );
    expect(manifest.images).toHaveLength(2);
    expect(manifest.layers.map((l) => l.name)).toEqual(["input", "relu1", "pool1", "pool2"]);
    const payloads = [...archiveBytes(out).keys()].filter((f) => f.endsWith(".bin"));
    expect(payloads).toHaveLength(2 * 4); // 2 images x 3 capture layers + 2 input tensors
  });

  it("stores the preprocessed image exactly as the input layer", async () => {
    const out = path.join(scratch, "arc2");
    await extractFeatures({ modelId: "tiny3-dev", images: [images[0]], layers: "default" }, out);
    const entry = findModel("tiny3-dev");
    const expected = preprocess(decodeImageFile(images[0].path), entry.preprocessing);
    const expectedBytes = Buffer.from(
      new Uint8Array((expected.dataSync() as Float32Array).buffer),
    );
    expected.dispose();
    const stored = fs.readFileSync(payloadPath(out, images[0].imageId, "input"));
    expect(Buffer.compare(stored, expectedBytes)).toBe(0);
  });

  it("is byte-identical across repeated extraction", async () => {
    const outA = path.join(scratch, "arcA");
    const outB = path.join(scratch, "arcB");
    await extractFeatures({ modelId: "tiny3-dev", images, layers: "default" }, outA);
    await extractFeatures({ modelId: "tiny3-dev", images, layers: "default" }, outB);
    const a = archiveBytes(outA);
    const b = archiveBytes(outB);
    expect([...a.keys()].sort()).toEqual([...b.keys()].sort());
    for (const [file, bytes] of a) {
      expect(Buffer.compare(bytes, b.get(file)!), file).toBe(0);
    }
  });

  it("names the offending file when an image cannot be decoded", async () => {
    const broken = path.join(scratch, "broken.bmp");
    fs.writeFileSync(broken, "this is not a bitmap");
    await expect(
      extractFeatures(
        { modelId: "tiny3-dev", images: [{ imageId: "broken", path: broken }], layers: "default" },
        path.join(scratch, "arcX"),
      ),
    ).rejects.toThrow(/broken\.bmp/);
  });

  it("rejects layers that resolve to no capture point", async () => {
    await expect(
      extractFeatures(
        { modelId: "tiny3-dev", images: [images[0]], layers: ["blah"] },
        path.join(scratch, "arcY"),
      ),
    ).rejects.toThrow(/does not resolve/);
  });
});

describe("image manifest parsing", () => {
  it("accepts id+path lines and bare paths, resolving relative to the manifest", () => {
    const dir = path.join(scratch, "manifest");
    fs.mkdirSync(dir, { recursive: true });
    fs.writeFileSync(path.join(dir, "list.txt"), "# comment\nfirst img/a.bmp\nimg/b.bmp\n");
    const refs = readImageManifest(path.join(dir, "list.txt"));
    expect(refs).toEqual([
      { imageId: "first", path: path.join(dir, "img/a.bmp") },
      { imageId: "b", path: path.join(dir, "img/b.bmp") },
    ]);
  });
});

describe("cross-component contract", () => {
  it("archives pass the numerical core's validate command with zero violations", async () => {
    const out = path.join(scratch, "arcValidate");
    const images = writeTempImages(path.join(scratch, "imgs2"), 4, "png", [24, 18]);
    await extractFeatures({ modelId: "tiny3-dev", images, layers: "default" }, out);
    const result = spawnSync("python3", ["-m", "featiq.cli", "validate", "--features", out], {
      encoding: "utf-8",
    });
    expect(result.error).toBeUndefined();
    expect(result.status, result.stderr).toBe(0);
    expect(result.stdout).toMatch(/archive OK: 4 images x 5 layers/);
  });

  it("the CLI extract command round-trips through the core as well", () => {
    const imgDir = path.join(scratch, "imgs3");
    const images = writeTempImages(imgDir, 2, "bmp");
    const manifestFile = path.join(imgDir, "list.txt");
    fs.writeFileSync(
      manifestFile,
      images.map((r) => `${r.imageId} ${path.basename(r.path)}`).join("\n") + "\n",
    );
    const out = path.join(scratch, "arcCli");
    const cli = new URL("../dist/cli.js", import.meta.url).pathname;
    const stdout = execFileSync(
      "node",
      [cli, "extract", "--model", "tiny3-dev", "--images", manifestFile, "--layers", "default", "--out", out],
      { encoding: "utf-8" },
    );
    expect(stdout).toMatch(/2 images x 5 layers/);
    const result = spawnSync("python3", ["-m", "featiq.cli", "validate", "--features", out], {
      encoding: "utf-8",
    });
    expect(result.status, result.stderr).toBe(0);
  }, 60_000);
});
