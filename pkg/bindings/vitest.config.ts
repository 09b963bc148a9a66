import { defineConfig } from "vitest/config";

// Every test that touches finetune or evaluate spawns the Python CLI, so
// the per-test budget is far above the default.
export default defineConfig({
  test: {
    testTimeout: 120_000,
  },
});
