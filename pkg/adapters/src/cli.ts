#!/usr/bin/env node
/**
 * Adapter command line: perception runs that emit engine interchange files,
 * plus batched model-QA and judge calls.
 *
 * Exit codes follow the engine convention: 0 success, 1 partial failure,
 * 2 invalid invocation (including missing credentials/endpoints).
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { HttpBackend, httpConfigFromEnv } from "./http.js";
import { ChatClient, llmConfigFromEnv, runJudge, runModelQa } from "./llm.js";
import { perceiveBatch, perceiveVideo, runDetection } from "./perception.js";
import { PermanentError } from "./retry.js";
import { SyntheticBackend } from "./synthetic.js";
import type { PerceptionBackend } from "./types.js";

function backendFor(name: string): PerceptionBackend {
  if (name === "synthetic") return new SyntheticBackend();
  if (name === "http") return new HttpBackend(httpConfigFromEnv());
  throw new PermanentError(`unknown backend ${name}; expected synthetic or http`);
}

function splitQueries(raw: string | undefined): string[] {
  if (!raw) return [];
  return raw.split(",").map((q) => q.trim()).filter((q) => q.length > 0);
}

const backendOption = {
  type: "string" as const,
  default: "synthetic",
  describe: "perception backend: synthetic (scene descriptors) or http (model servers)",
};

async function main(): Promise<number> {
  const parser = yargs(hideBin(process.argv))
    .scriptName("mg-adapters")
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      throw err ?? new PermanentError(msg ?? "invalid invocation");
    })
    .command(
      "detect",
      "run grounded detection for one video and emit detections.jsonl",
      (y) =>
        y
          .option("video", { type: "string", demandOption: true })
          .option("out", { type: "string", demandOption: true })
          .option("queries", { type: "string", describe: "comma-separated entity queries; empty = detect-all" })
          .option("backend", backendOption),
      async (argv) => {
        const backend = backendFor(argv.backend);
        const { info, detectionsPath } = await runDetection(backend, {
          videoPath: argv.video,
          queries: splitQueries(argv.queries),
          outDir: argv.out,
          seedStride: 4,
        });
        console.log(`${info.videoId}: wrote ${detectionsPath}`);
      },
    )
    .command(
      "perceive",
      "full perception run over a batch of videos; emits interchange files and dataset.json",
      (y) =>
        y
          .option("videos", { type: "string", demandOption: true, describe: "comma-separated video paths" })
          .option("out", { type: "string", demandOption: true })
          .option("queries", { type: "string" })
          .option("stride", { type: "number", default: 4, describe: "track seed grid stride (px)" })
          .option("backend", backendOption),
      async (argv) => {
        const backend = backendFor(argv.backend);
        const videos = argv.videos.split(",").map((v) => v.trim()).filter(Boolean);
        const { manifestPath, failures } = await perceiveBatch(
          backend, videos, argv.out, splitQueries(argv.queries), argv.stride,
        );
        console.log(`manifest: ${manifestPath} (${videos.length - failures.length}/${videos.length} videos)`);
        for (const failure of failures) {
          console.error(`failed: ${failure.video}: ${failure.error}`);
        }
        if (failures.length > 0) process.exitCode = 1;
      },
    )
    .command(
      "track-depth",
      "tracking + depth for one video (expects the same backend as detect)",
      (y) =>
        y
          .option("video", { type: "string", demandOption: true })
          .option("out", { type: "string", demandOption: true })
          .option("queries", { type: "string" })
          .option("stride", { type: "number", default: 4 })
          .option("backend", backendOption),
      async (argv) => {
        const backend = backendFor(argv.backend);
        const artifacts = await perceiveVideo(backend, {
          videoPath: argv.video,
          queries: splitQueries(argv.queries),
          outDir: argv.out,
          seedStride: argv.stride,
        });
        console.log(`${artifacts.info.videoId}: wrote ${artifacts.tracksPath} and ${artifacts.depthDir}`);
      },
    )
    .command(
      "model-qa",
      "answer engine prompts with a chat model; emits responses.jsonl",
      (y) =>
        y
          .option("prompts", { type: "string", demandOption: true, describe: "engine profile output dir" })
          .option("model", { type: "string", demandOption: true })
          .option("out", { type: "string", demandOption: true }),
      async (argv) => {
        const client = new ChatClient(llmConfigFromEnv());
        const result = await runModelQa(client, argv.prompts, argv.model, argv.out);
        console.log(`wrote ${result.written} responses to ${argv.out}`);
        if (result.missing.length > 0) {
          console.error(`missing: ${result.missing.join(", ")}`);
          process.exitCode = 1;
        }
      },
    )
    .command(
      "judge",
      "run judge requests through a chat model; emits judge_responses.jsonl",
      (y) =>
        y
          .option("requests", { type: "string", demandOption: true, describe: "judge_requests.jsonl" })
          .option("model", { type: "string", demandOption: true })
          .option("out", { type: "string", demandOption: true }),
      async (argv) => {
        const client = new ChatClient(llmConfigFromEnv());
        const result = await runJudge(client, argv.requests, argv.model, argv.out);
        console.log(`wrote ${result.written} judge responses to ${argv.out}`);
        if (result.missing.length > 0) {
          console.error(`missing: ${result.missing.join(", ")}`);
          process.exitCode = 1;
        }
      },
    )
    .demandCommand(1, "specify a command");

  try {
    await parser.parseAsync();
    return Number(process.exitCode ?? 0);
  } catch (error) {
    console.error(String(error instanceof Error ? error.message : error));
    return error instanceof PermanentError ? 2 : 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
