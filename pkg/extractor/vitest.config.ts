import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    testTimeout: 30_000,
    // tfjs keeps a worker-ish environment alive; run files sequentially
    fileParallelism: false,
  },
});
