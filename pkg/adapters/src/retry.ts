/** Exponential-backoff retry used by every network-facing call. */

export type FetchLike = (url: string, init: RequestInit) => Promise<Response>;

export interface RetryConfig {
  retries: number;
  minDelayMs: number;
  maxDelayMs: number;
  /** overridable for tests; defaults to real sleeping */
  sleep?: (ms: number) => Promise<void>;
  onRetry?: (attempt: number, error: unknown, delayMs: number) => void;
}

export const DEFAULT_RETRY: RetryConfig = {
  retries: 4,
  minDelayMs: 500,
  maxDelayMs: 8000,
};

/** Error the caller marks as permanent; withRetry rethrows it immediately. */
export class PermanentError extends Error {
  constructor(message: string, readonly cause?: unknown) {
    super(message);
    this.name = "PermanentError";
  }
}

const realSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export async function withRetry<T>(fn: () => Promise<T>, config: RetryConfig = DEFAULT_RETRY): Promise<T> {
  const sleep = config.sleep ?? realSleep;
  let delay = config.minDelayMs;
  let lastError: unknown;
  for (let attempt = 0; attempt <= config.retries; attempt++) {
    try {
      return await fn();
    } catch (error) {
      if (error instanceof PermanentError) throw error;
      lastError = error;
      if (attempt === config.retries) break;
      config.onRetry?.(attempt + 1, error, delay);
      await sleep(delay);
      delay = Math.min(delay * 2, config.maxDelayMs);
    }
  }
  throw lastError;
}
