import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globalSetup: "./test/globalSetup.ts",
    fileParallelism: false, // tests share one backend store
    testTimeout: 30000,
    hookTimeout: 120000,
  },
});
