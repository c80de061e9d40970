import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'node',
    // the round-trip test spawns the Python service and waits for it
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
