/**
 * Chat-completions client plus the JSONL batch runs for model answers and
 * judge verdicts. API shape follows the OpenAI chat API; point it anywhere
 * compatible via OPENAI_BASE_URL.
 */

import { readFileSync, readdirSync, statSync } from "node:fs";
import { join } from "node:path";

import { writeJsonl } from "./interchange.js";
import {
  DEFAULT_RETRY,
  PermanentError,
  withRetry,
  type FetchLike,
  type RetryConfig,
} from "./retry.js";

export interface LlmConfig {
  baseUrl: string;
  apiKey: string;
  fetchFn?: FetchLike;
  retry?: RetryConfig;
}

export function llmConfigFromEnv(env: NodeJS.ProcessEnv = process.env): LlmConfig {
  const apiKey = env.OPENAI_API_KEY;
  if (!apiKey) {
    throw new PermanentError("OPENAI_API_KEY is not set");
  }
  return {
    baseUrl: (env.OPENAI_BASE_URL ?? "https://api.openai.com/v1").replace(/\/$/, ""),
    apiKey,
  };
}

export class ChatClient {
  private readonly fetchFn: FetchLike;
  private readonly retry: RetryConfig;

  constructor(private readonly config: LlmConfig) {
    this.fetchFn = config.fetchFn ?? ((url, init) => fetch(url, init));
    this.retry = config.retry ?? {
      ...DEFAULT_RETRY,
      onRetry: (attempt, error, delayMs) =>
        console.error(`chat retry ${attempt} in ${delayMs}ms: ${String(error)}`),
    };
  }

  async complete(model: string, prompt: string): Promise<string> {
    return withRetry(async () => {
      const response = await this.fetchFn(`${this.config.baseUrl}/chat/completions`, {
        method: "POST",
        headers: {
          Authorization: `Bearer ${this.config.apiKey}`,
          "Content-Type": "application/json",
        },
        body: JSON.stringify({
          model,
          messages: [{ role: "user", content: prompt }],
        }),
      });
      if (!response.ok) {
        const body = await response.text();
        const message = `chat/completions -> HTTP ${response.status}: ${body.slice(0, 200)}`;
        if (response.status < 500 && response.status !== 429) throw new PermanentError(message);
        throw new Error(message); // retried with backoff
      }
      const data = (await response.json()) as {
        choices?: { message?: { content?: string } }[];
      };
      const text = data.choices?.[0]?.message?.content;
      if (typeof text !== "string") throw new PermanentError("response carries no message content");
      return text;
    }, this.retry);
  }
}

export interface BatchResult {
  written: number;
  /** ids whose API calls failed permanently; recorded, not fatal */
  missing: string[];
}

/** Find <video>/<qa>/prompt.txt files under an engine `profile` output dir. */
export function collectPrompts(promptsDir: string): { id: string; prompt: string }[] {
  const items: { id: string; prompt: string }[] = [];
  for (const video of readdirSync(promptsDir).sort()) {
    const videoDir = join(promptsDir, video);
    if (!statSync(videoDir).isDirectory()) continue;
    for (const qa of readdirSync(videoDir).sort()) {
      const promptPath = join(videoDir, qa, "prompt.txt");
      try {
        items.push({ id: qa, prompt: readFileSync(promptPath, "utf-8") });
      } catch {
        continue; // not a QA item directory
      }
    }
  }
  return items;
}

async function runBatch(
  client: ChatClient,
  model: string,
  items: { id: string; prompt: string }[],
  outPath: string,
  log: (line: string) => void,
): Promise<BatchResult> {
  const rows: { id: string; text: string }[] = [];
  const missing: string[] = [];
  for (const item of items) {
    try {
      rows.push({ id: item.id, text: await client.complete(model, item.prompt) });
    } catch (error) {
      log(`item ${item.id} failed: ${String(error)}`);
      missing.push(item.id);
    }
  }
  writeJsonl(outPath, rows);
  return { written: rows.length, missing };
}

export async function runModelQa(
  client: ChatClient,
  promptsDir: string,
  model: string,
  outPath: string,
  log: (line: string) => void = console.error,
): Promise<BatchResult> {
  return runBatch(client, model, collectPrompts(promptsDir), outPath, log);
}

export async function runJudge(
  client: ChatClient,
  requestsPath: string,
  model: string,
  outPath: string,
  log: (line: string) => void = console.error,
): Promise<BatchResult> {
  const items = readFileSync(requestsPath, "utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => {
      const obj = JSON.parse(line) as { id: string; prompt: string };
      return { id: obj.id, prompt: obj.prompt };
    });
  return runBatch(client, model, items, outPath, log);
}
