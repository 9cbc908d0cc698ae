#!/usr/bin/env node
import { DetectorBackend, FixtureBackend } from "./backend.js";
import { parseArgs } from "./config.js";
import { serve } from "./server.js";
import { TfjsBackend } from "./tfjsBackend.js";

async function main(): Promise<number> {
  let config;
  try {
    config = parseArgs(process.argv.slice(2));
  } catch (err) {
    console.error(`detector-adapter: ${(err as Error).message}`);
    console.error("usage: detector-adapter --weights <path> [--backend tfjs|fixture]");
    return 2;
  }

  let backend: DetectorBackend;
  try {
    backend =
      config.backend === "fixture"
        ? new FixtureBackend(config.weightsPath)
        : await TfjsBackend.load({
            weightsPath: config.weightsPath,
            inputSize: config.inputSize,
            decode: config.decode,
            candidateThreshold: config.candidateThreshold,
            classNames: config.classNames,
          });
  } catch (err) {
    console.error(`detector-adapter: failed to load weights: ${(err as Error).message}`);
    return 1;
  }

  console.error(`detector-adapter: serving (${config.backend} backend)`);
  await serve(backend, config, process.stdin, process.stdout);
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(`detector-adapter: fatal: ${err}`);
    process.exit(1);
  },
);
