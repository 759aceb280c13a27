/**
 * Perception backend speaking to model servers over HTTP.
 *
 * Endpoints come from environment variables:
 *   MG_DETECTOR_URL  grounded detector + mask generator
 *   MG_TRACKER_URL   point tracker
 *   MG_DEPTH_URL     monocular depth estimator
 *
 * Wire contract (JSON over POST):
 *   {detector}/probe   {video}                    -> VideoInfo fields (snake_case)
 *   {detector}/detect  {video, queries}           -> {detections: DetectionRow[]}
 *   {detector}/masks   {video, detections}        -> {regions: MaskRegion[]}
 *   {tracker}/track    {video, seeds}             -> {tracks: [{entity, points}]}
 *   {depth}/depth      {video, frame}             -> {width, height, values_b64: f32le}
 */

import {
  DEFAULT_RETRY,
  PermanentError,
  withRetry,
  type FetchLike,
  type RetryConfig,
} from "./retry.js";
import type {
  DetectionRow,
  EntityTracks,
  MaskRegion,
  PerceptionBackend,
  SeedPoint,
  VideoInfo,
} from "./types.js";

export interface HttpBackendConfig {
  detectorUrl: string;
  trackerUrl: string;
  depthUrl: string;
  fetchFn?: FetchLike;
  retry?: RetryConfig;
}

export function httpConfigFromEnv(env: NodeJS.ProcessEnv = process.env): HttpBackendConfig {
  const detectorUrl = env.MG_DETECTOR_URL;
  const trackerUrl = env.MG_TRACKER_URL;
  const depthUrl = env.MG_DEPTH_URL;
  if (!detectorUrl || !trackerUrl || !depthUrl) {
    throw new PermanentError(
      "http backend needs MG_DETECTOR_URL, MG_TRACKER_URL and MG_DEPTH_URL",
    );
  }
  return { detectorUrl, trackerUrl, depthUrl };
}

export class HttpBackend implements PerceptionBackend {
  readonly name = "http";
  private readonly fetchFn: FetchLike;
  private readonly retry: RetryConfig;

  constructor(private readonly config: HttpBackendConfig) {
    this.fetchFn = config.fetchFn ?? ((url, init) => fetch(url, init));
    this.retry = config.retry ?? {
      ...DEFAULT_RETRY,
      onRetry: (attempt, error, delayMs) =>
        console.error(`perception retry ${attempt} in ${delayMs}ms: ${String(error)}`),
    };
  }

  private async post<T>(base: string, path: string, payload: object): Promise<T> {
    return withRetry(async () => {
      const response = await this.fetchFn(`${base}${path}`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      });
      if (!response.ok) {
        const body = await response.text();
        const error = new Error(`${path} -> HTTP ${response.status}: ${body.slice(0, 200)}`);
        // client errors are permanent; 429 and 5xx are worth retrying
        if (response.status < 500 && response.status !== 429) throw new PermanentError(error.message);
        throw error;
      }
      return (await response.json()) as T;
    }, this.retry);
  }

  async probeVideo(videoPath: string): Promise<VideoInfo> {
    const raw = await this.post<{
      video_id: string; width: number; height: number; fps: number; frame_count: number;
    }>(this.config.detectorUrl, "/probe", { video: videoPath });
    return {
      videoId: raw.video_id,
      width: raw.width,
      height: raw.height,
      fps: raw.fps,
      frameCount: raw.frame_count,
    };
  }

  async detect(videoPath: string, _info: VideoInfo, queries: string[]): Promise<DetectionRow[]> {
    const raw = await this.post<{ detections: DetectionRow[] }>(
      this.config.detectorUrl, "/detect", { video: videoPath, queries },
    );
    return raw.detections;
  }

  async maskRegions(videoPath: string, _info: VideoInfo, detections: DetectionRow[]): Promise<MaskRegion[]> {
    const raw = await this.post<{ regions: MaskRegion[] }>(
      this.config.detectorUrl, "/masks", { video: videoPath, detections },
    );
    return raw.regions;
  }

  async trackPoints(videoPath: string, _info: VideoInfo, seeds: SeedPoint[]): Promise<EntityTracks[]> {
    const raw = await this.post<{ tracks: EntityTracks[] }>(
      this.config.trackerUrl, "/track", { video: videoPath, seeds },
    );
    return raw.tracks;
  }

  async depthFrame(videoPath: string, info: VideoInfo, frame: number): Promise<Float32Array> {
    const raw = await this.post<{ width: number; height: number; values_b64: string }>(
      this.config.depthUrl, "/depth", { video: videoPath, frame },
    );
    if (raw.width !== info.width || raw.height !== info.height) {
      throw new PermanentError(
        `depth ${raw.width}x${raw.height} does not match video ${info.width}x${info.height}`,
      );
    }
    const bytes = Buffer.from(raw.values_b64, "base64");
    return new Float32Array(bytes.buffer, bytes.byteOffset, bytes.byteLength / 4);
  }
}
