/**
 * Writers for the engine's interchange formats. Byte layouts here must stay
 * in lockstep with the engine parsers; the smoke test enforces that by
 * running the engine's `validate` over everything emitted.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import type { DetectionRow, EntityTracks, VideoInfo } from "./types.js";

export const DEPTH_MAGIC = "MGD1";

export function depthFileName(frameIndex: number): string {
  return `depth_${String(frameIndex).padStart(6, "0")}.bin`;
}

/** MGD1: magic, u32 width/height/frame (LE), then w*h float32 LE row-major. */
export function encodeDepthFrame(
  width: number,
  height: number,
  frameIndex: number,
  values: Float32Array,
): Buffer {
  if (values.length !== width * height) {
    throw new Error(`depth grid ${values.length} != ${width}x${height}`);
  }
  const buf = Buffer.alloc(16 + 4 * values.length);
  buf.write(DEPTH_MAGIC, 0, "ascii");
  buf.writeUInt32LE(width, 4);
  buf.writeUInt32LE(height, 8);
  buf.writeUInt32LE(frameIndex, 12);
  for (let i = 0; i < values.length; i++) {
    buf.writeFloatLE(values[i]!, 16 + 4 * i);
  }
  return buf;
}

export function writeDetectionsJsonl(path: string, rows: DetectionRow[]): void {
  const lines = rows.map((r) =>
    JSON.stringify({ frame: r.frame, entity: r.entity, bbox: r.bbox, score: r.score }),
  );
  writeFileSync(path, lines.map((l) => l + "\n").join(""), "utf-8");
}

export function writeTracksJson(path: string, tracks: EntityTracks[]): void {
  const doc = tracks.map((t) => ({
    entity_label: t.entity,
    points: t.points.map((point) => point.map((s) => [s.x, s.y, s.visible ? 1 : 0])),
  }));
  writeFileSync(path, JSON.stringify(doc), "utf-8");
}

export function writeDepthDir(
  dir: string,
  info: VideoInfo,
  frameOf: (frame: number) => Float32Array,
): void {
  mkdirSync(dir, { recursive: true });
  for (let f = 0; f < info.frameCount; f++) {
    const values = frameOf(f);
    writeFileSync(join(dir, depthFileName(f)), encodeDepthFrame(info.width, info.height, f, values));
  }
}

export interface ManifestVideo {
  info: VideoInfo;
  detections: string;
  tracks: string;
  depthDir: string;
}

/** dataset.json with artifact paths relative to the manifest location. */
export function writeManifest(path: string, videos: ManifestVideo[]): void {
  const doc = {
    videos: videos.map((v) => ({
      video_id: v.info.videoId,
      width: v.info.width,
      height: v.info.height,
      fps: v.info.fps,
      frame_count: v.info.frameCount,
      detections: v.detections,
      tracks: v.tracks,
      depth_dir: v.depthDir,
    })),
  };
  writeFileSync(path, JSON.stringify(doc, null, 2) + "\n", "utf-8");
}

export function writeJsonl(path: string, rows: object[]): void {
  writeFileSync(path, rows.map((r) => JSON.stringify(r) + "\n").join(""), "utf-8");
}
