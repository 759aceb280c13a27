/**
 * Perception runs: detection, seed sampling, tracking, depth, and manifest
 * assembly. All grounding math stays in the engine; this layer only turns
 * backend outputs into interchange files.
 */

import { mkdirSync } from "node:fs";
import { join } from "node:path";

import {
  writeDetectionsJsonl,
  writeDepthDir,
  writeManifest,
  writeTracksJson,
  type ManifestVideo,
} from "./interchange.js";
import type {
  AdapterJob,
  MaskRegion,
  PerceptionBackend,
  SeedPoint,
  VideoInfo,
} from "./types.js";

/**
 * Uniform grid of track seeds inside a mask region at a configurable
 * stride; always yields at least the region center.
 */
export function sampleSeeds(region: MaskRegion, stride: number): SeedPoint[] {
  const [x1, y1, x2, y2] = region.rect;
  const seeds: SeedPoint[] = [];
  for (let y = y1 + stride / 2; y < y2; y += stride) {
    for (let x = x1 + stride / 2; x < x2; x += stride) {
      seeds.push({ entity: region.entity, x, y, frame: region.frame });
    }
  }
  if (seeds.length === 0) {
    seeds.push({ entity: region.entity, x: (x1 + x2) / 2, y: (y1 + y2) / 2, frame: region.frame });
  }
  return seeds;
}

export interface PerceptionArtifacts {
  info: VideoInfo;
  detectionsPath: string;
  tracksPath: string;
  depthDir: string;
}

export async function runDetection(
  backend: PerceptionBackend,
  job: AdapterJob,
): Promise<{ info: VideoInfo; detectionsPath: string }> {
  const info = await backend.probeVideo(job.videoPath);
  const detections = await backend.detect(job.videoPath, info, job.queries);
  mkdirSync(join(job.outDir, info.videoId), { recursive: true });
  const detectionsPath = join(job.outDir, info.videoId, "detections.jsonl");
  writeDetectionsJsonl(detectionsPath, detections);
  return { info, detectionsPath };
}

export async function runTrackingAndDepth(
  backend: PerceptionBackend,
  job: AdapterJob,
  info: VideoInfo,
): Promise<{ tracksPath: string; depthDir: string }> {
  const detections = await backend.detect(job.videoPath, info, job.queries);
  const regions = await backend.maskRegions(job.videoPath, info, detections);
  const seeds = regions.flatMap((region) => sampleSeeds(region, job.seedStride));
  const tracks = await backend.trackPoints(job.videoPath, info, seeds);

  const videoDir = join(job.outDir, info.videoId);
  mkdirSync(videoDir, { recursive: true });
  const tracksPath = join(videoDir, "tracks.json");
  writeTracksJson(tracksPath, tracks);

  const depthDir = join(videoDir, "depth");
  const frames: Float32Array[] = [];
  for (let f = 0; f < info.frameCount; f++) {
    frames.push(await backend.depthFrame(job.videoPath, info, f));
  }
  writeDepthDir(depthDir, info, (f) => frames[f]!);
  return { tracksPath, depthDir };
}

export async function perceiveVideo(backend: PerceptionBackend, job: AdapterJob): Promise<PerceptionArtifacts> {
  const { info, detectionsPath } = await runDetection(backend, job);
  const { tracksPath, depthDir } = await runTrackingAndDepth(backend, job, info);
  return { info, detectionsPath, tracksPath, depthDir };
}

/** Process a batch of videos and assemble dataset.json next to the outputs. */
export async function perceiveBatch(
  backend: PerceptionBackend,
  videoPaths: string[],
  outDir: string,
  queries: string[],
  seedStride: number,
): Promise<{ manifestPath: string; failures: { video: string; error: string }[] }> {
  mkdirSync(outDir, { recursive: true });
  const videos: ManifestVideo[] = [];
  const failures: { video: string; error: string }[] = [];
  for (const videoPath of videoPaths) {
    try {
      const artifacts = await perceiveVideo(backend, { videoPath, queries, outDir, seedStride });
      videos.push({
        info: artifacts.info,
        detections: `${artifacts.info.videoId}/detections.jsonl`,
        tracks: `${artifacts.info.videoId}/tracks.json`,
        depthDir: `${artifacts.info.videoId}/depth`,
      });
    } catch (error) {
      failures.push({ video: videoPath, error: String(error) });
    }
  }
  const manifestPath = join(outDir, "dataset.json");
  writeManifest(manifestPath, videos);
  return { manifestPath, failures };
}
