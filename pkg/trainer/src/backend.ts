/** Backend selection: the wasm kernels are an order of magnitude faster than
 * the pure-JS CPU backend for the 256-unit nets; fall back to CPU when the
 * wasm package is unavailable. */
import * as tf from "@tensorflow/tfjs";
import { createRequire } from "node:module";
import * as path from "node:path";

export async function initBackend(prefer: "wasm" | "cpu" = "wasm"): Promise<string> {
  if (prefer === "wasm") {
    try {
      const wasm = await import("@tensorflow/tfjs-backend-wasm");
      const require = createRequire(import.meta.url);
      const entry = require.resolve("@tensorflow/tfjs-backend-wasm");
      wasm.setWasmPaths(path.dirname(entry) + path.sep);
      if (await tf.setBackend("wasm")) {
        await tf.ready();
        return tf.getBackend();
      }
    } catch {
      // fall through to cpu
    }
  }
  await tf.setBackend("cpu");
  await tf.ready();
  return tf.getBackend();
}
