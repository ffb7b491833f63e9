import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // the overfit criterion runs 2000 optimizer steps in-process
    testTimeout: 180_000,
    hookTimeout: 120_000,
  },
});
