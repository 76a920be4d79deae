/**
 * Model registry: which pretrained networks the extractor knows about, where
 * their published checkpoints come from, and which capture points are read.
 *
 * `builder` names a built-in architecture reconstruction (shapes and capture
 * points only; parameters are seeded, not trained). Entries whose published
 * weights live in an external zoo carry the source and a checksum slot for
 * pinning a downloaded checkpoint; those without a builder need a converted
 * local bundle before they can run here.
 */

import type { Shape3 } from "./archive.js";

export interface PreprocessSpec {
  /** resize target [height, width]; null keeps native resolution */
  resize: [number, number] | null;
  /** per-channel mean/std applied after scaling pixels to [0, 1] */
  mean: [number, number, number];
  std: [number, number, number];
}

export interface ModelRegistryEntry {
  model_id: string;
  architecture: string;
  training: string;
  training_data: string;
  imagenet_top1: number | null;
  source: string;
  checkpoint_sha256: string | null;
  builder: "alexnet" | "vgg16" | "tiny3" | null;
  weights: "builtin-seeded" | "external";
  default_layers: string[];
  declared_input: Shape3;
  preprocessing: PreprocessSpec;
}

const IMAGENET_PREPROCESS: PreprocessSpec = {
  resize: [224, 224],
  mean: [0.485, 0.456, 0.406],
  std: [0.229, 0.224, 0.225],
};

const PLAIN_PREPROCESS: PreprocessSpec = {
  resize: [32, 32],
  mean: [0.0, 0.0, 0.0],
  std: [1.0, 1.0, 1.0],
};

// capture-point reconstruction: post-nonlinearity at block boundaries plus
// the max-pool outputs (the exact recorded set is not published)
const ALEXNET_LAYERS = [
  "relu1",
  "pool1",
  "relu2",
  "pool2",
  "relu3",
  "relu4",
  "relu5",
  "pool5",
];

const VGG16_LAYERS = [
  "relu1_2",
  "pool1",
  "relu2_2",
  "pool2",
  "relu3_3",
  "pool3",
  "relu4_3",
  "pool4",
  "relu5_3",
  "pool5",
];

function alexnetEntry(
  modelId: string,
  training: string,
  trainingData: string,
  top1: number | null,
  source: string,
  builder: "alexnet" | null = "alexnet",
): ModelRegistryEntry {
  return {
    model_id: modelId,
    architecture: "AlexNet",
    training,
    training_data: trainingData,
    imagenet_top1: top1,
    source,
    checkpoint_sha256: null,
    builder,
    weights: "external",
    default_layers: builder ? ALEXNET_LAYERS : [],
    declared_input: [224, 224, 3],
    preprocessing: IMAGENET_PREPROCESS,
  };
}

export const MODEL_REGISTRY: ModelRegistryEntry[] = [
  alexnetEntry("alexnet-imagenet-supervised", "supervised", "ImageNet-1K", 56.5, "TorchVision"),
  {
    model_id: "vgg16-imagenet-supervised",
    architecture: "VGG-16",
    training: "supervised",
    training_data: "ImageNet-1K",
    imagenet_top1: 71.3,
    source: "Keras Applications",
    checkpoint_sha256: null,
    builder: "vgg16",
    weights: "external",
    default_layers: VGG16_LAYERS,
    declared_input: [224, 224, 3],
    preprocessing: IMAGENET_PREPROCESS,
  },
  {
    model_id: "densenet121-imagenet-supervised",
    architecture: "DenseNet-121",
    training: "supervised",
    training_data: "ImageNet-1K",
    imagenet_top1: 75.0,
    source: "Keras Applications",
    checkpoint_sha256: null,
    builder: null,
    weights: "external",
    default_layers: [],
    declared_input: [224, 224, 3],
    preprocessing: IMAGENET_PREPROCESS,
  },
  {
    model_id: "resnet50-imagenet-supervised",
    architecture: "ResNet-50",
    training: "supervised",
    training_data: "ImageNet-1K",
    imagenet_top1: 74.9,
    source: "Keras Applications",
    checkpoint_sha256: null,
    builder: null,
    weights: "external",
    default_layers: [],
    declared_input: [224, 224, 3],
    preprocessing: IMAGENET_PREPROCESS,
  },
  {
    model_id: "efficientnetb0-imagenet-supervised",
    architecture: "EfficientNet-B0",
    training: "supervised",
    training_data: "ImageNet-1K",
    imagenet_top1: 77.7,
    source: "TorchVision",
    checkpoint_sha256: null,
    builder: null,
    weights: "external",
    default_layers: [],
    declared_input: [224, 224, 3],
    preprocessing: IMAGENET_PREPROCESS,
  },
  alexnetEntry("alexnet-imagenet-rotnet", "self-rotnet", "ImageNet-1K", 39.5, "VISSL"),
  alexnetEntry("alexnet-imagenet-jigsaw", "self-jigsaw", "ImageNet-1K", 34.8, "VISSL"),
  alexnetEntry("alexnet-imagenet-colorization", "self-colorization", "ImageNet-1K", 30.4, "VISSL"),
  alexnetEntry("alexnet-imagenet-deepcluster", "self-deepcluster", "ImageNet-1K", 37.9, "VISSL"),
  // training-data variants; their published checkpoints use zoo-specific
  // AlexNet layouts (grouped convs / CIFAR-sized stacks), so no builtin builder
  alexnetEntry(
    "alexnet-places365-supervised",
    "supervised",
    "Places-365",
    null,
    "MIT CSAIL Computer Vision",
    null,
  ),
  alexnetEntry(
    "alexnet-cifar10-supervised",
    "supervised",
    "Cifar-10",
    null,
    "third-party Cifar-10 AlexNet checkpoint",
    null,
  ),
  {
    model_id: "tiny3-dev",
    architecture: "Tiny3",
    training: "none (deterministic seeded parameters)",
    training_data: "none",
    imagenet_top1: null,
    source: "built-in test model",
    checkpoint_sha256: null,
    builder: "tiny3",
    weights: "builtin-seeded",
    default_layers: ["relu1", "pool1", "relu2", "pool2"],
    declared_input: [32, 32, 3],
    preprocessing: PLAIN_PREPROCESS,
  },
];

export function listModels(): ModelRegistryEntry[] {
  return MODEL_REGISTRY.map((entry) => ({ ...entry }));
}

export function findModel(modelId: string): ModelRegistryEntry {
  const entry = MODEL_REGISTRY.find((e) => e.model_id === modelId);
  if (!entry) {
    const known = MODEL_REGISTRY.map((e) => e.model_id).join(", ");
    throw new Error(`unknown model "${modelId}" (known: ${known})`);
  }
  return entry;
}

export function describePreprocessing(entry: ModelRegistryEntry): string {
  const spec = entry.preprocessing;
  const resize = spec.resize ? `resize ${spec.resize[0]}x${spec.resize[1]} bilinear` : "native resolution";
  const note =
    entry.weights === "builtin-seeded"
      ? "seeded deterministic parameters"
      : "UNTRAINED reconstruction with seeded parameters (published checkpoint not loaded)";
  return (
    `${resize}; scale 1/255; mean ${JSON.stringify(spec.mean)}; std ${JSON.stringify(spec.std)}; ${note}`
  );
}
