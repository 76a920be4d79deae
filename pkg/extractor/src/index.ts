export {
  ArchiveError,
  ArchiveWriter,
  payloadPath,
  validateManifest,
  type ArchiveManifest,
  type LayerDescriptor,
  type Shape3,
} from "./archive.js";
export { extractFeatures, readImageManifest, type ExtractionJob, type ImageRef } from "./extract.js";
export { CaptureModel, buildModel, type CapturePoint } from "./models.js";
export {
  decodeBmp,
  decodeImageFile,
  decodePng,
  decodePpm,
  preprocess,
  ImageDecodeError,
  type DecodedImage,
} from "./preprocess.js";
export {
  MODEL_REGISTRY,
  describePreprocessing,
  findModel,
  listModels,
  type ModelRegistryEntry,
  type PreprocessSpec,
} from "./registry.js";
