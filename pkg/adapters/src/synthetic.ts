/**
 * Deterministic stand-in for the perception model stack.
 *
 * A "video" is a scene descriptor (*.scene.json) scripting entities with
 * linear motion and a depth plane. Outputs are reproducible byte-for-byte
 * across runs, which the smoke tests rely on; anything stochastic a real
 * model would produce is out of scope here.
 */

import { readFileSync } from "node:fs";

import type {
  DetectionRow,
  EntityTracks,
  MaskRegion,
  PerceptionBackend,
  SeedPoint,
  VideoInfo,
} from "./types.js";

export interface SceneEntity {
  label: string;
  /** bbox at the first visible frame */
  start_bbox: [number, number, number, number];
  /** pixels per frame */
  velocity: [number, number];
  /** inclusive visible frame range */
  visible: [number, number];
  score?: number;
}

export interface SceneDepth {
  near?: number;
  slope_y?: number;
  drift?: number;
  /** depth holes: [x1, y1, x2, y2, first_frame, last_frame] */
  holes?: [number, number, number, number, number, number][];
}

export interface SceneDescriptor {
  video_id: string;
  width: number;
  height: number;
  fps: number;
  frame_count: number;
  entities: SceneEntity[];
  depth?: SceneDepth;
}

function loadScene(videoPath: string): SceneDescriptor {
  if (!videoPath.endsWith(".scene.json")) {
    throw new Error(`synthetic backend cannot decode ${videoPath}; expected a *.scene.json descriptor`);
  }
  const scene = JSON.parse(readFileSync(videoPath, "utf-8")) as SceneDescriptor;
  for (const key of ["video_id", "width", "height", "fps", "frame_count"] as const) {
    if (scene[key] === undefined) throw new Error(`scene ${videoPath}: missing ${key}`);
  }
  if (!Array.isArray(scene.entities) || scene.entities.length === 0) {
    throw new Error(`scene ${videoPath}: no entities`);
  }
  return scene;
}

function bboxAt(entity: SceneEntity, frame: number, width: number, height: number) {
  const dt = frame - entity.visible[0];
  const [x1, y1, x2, y2] = entity.start_bbox;
  const [vx, vy] = entity.velocity;
  const moved: [number, number, number, number] = [
    x1 + vx * dt,
    y1 + vy * dt,
    x2 + vx * dt,
    y2 + vy * dt,
  ];
  const clamped: [number, number, number, number] = [
    Math.min(Math.max(moved[0], 0), width),
    Math.min(Math.max(moved[1], 0), height),
    Math.min(Math.max(moved[2], 0), width),
    Math.min(Math.max(moved[3], 0), height),
  ];
  if (clamped[0] >= clamped[2] || clamped[1] >= clamped[3]) return null; // fully out of frame
  return clamped;
}

export class SyntheticBackend implements PerceptionBackend {
  readonly name = "synthetic";

  async probeVideo(videoPath: string): Promise<VideoInfo> {
    const scene = loadScene(videoPath);
    return {
      videoId: scene.video_id,
      width: scene.width,
      height: scene.height,
      fps: scene.fps,
      frameCount: scene.frame_count,
    };
  }

  async detect(videoPath: string, info: VideoInfo, queries: string[]): Promise<DetectionRow[]> {
    const scene = loadScene(videoPath);
    const wanted = new Set(queries.map((q) => q.toLowerCase()));
    const rows: DetectionRow[] = [];
    for (const entity of scene.entities) {
      if (wanted.size > 0 && !wanted.has(entity.label.toLowerCase())) continue;
      const [first, last] = entity.visible;
      for (let f = Math.max(first, 0); f <= Math.min(last, info.frameCount - 1); f++) {
        const bbox = bboxAt(entity, f, info.width, info.height);
        if (bbox === null) continue;
        rows.push({ frame: f, entity: entity.label, bbox, score: entity.score ?? 0.9 });
      }
    }
    return rows;
  }

  async maskRegions(videoPath: string, info: VideoInfo, detections: DetectionRow[]): Promise<MaskRegion[]> {
    // mask of the first detection per entity; real backends return SAM-style
    // masks, of which only the seed-constraining region survives
    const regions = new Map<string, MaskRegion>();
    for (const det of detections) {
      const prev = regions.get(det.entity);
      if (!prev || det.frame < prev.frame) {
        regions.set(det.entity, { entity: det.entity, frame: det.frame, rect: det.bbox });
      }
    }
    return [...regions.values()];
  }

  async trackPoints(videoPath: string, info: VideoInfo, seeds: SeedPoint[]): Promise<EntityTracks[]> {
    const scene = loadScene(videoPath);
    const byLabel = new Map(scene.entities.map((e) => [e.label, e]));
    const grouped = new Map<string, SeedPoint[]>();
    for (const seed of seeds) {
      const bucket = grouped.get(seed.entity) ?? [];
      bucket.push(seed);
      grouped.set(seed.entity, bucket);
    }

    const out: EntityTracks[] = [];
    for (const [label, entitySeeds] of grouped) {
      const entity = byLabel.get(label);
      if (!entity) continue;
      const points = entitySeeds.map((seed) => {
        const samples = [];
        for (let f = 0; f < info.frameCount; f++) {
          const dt = f - seed.frame;
          const x = seed.x + entity.velocity[0] * dt;
          const y = seed.y + entity.velocity[1] * dt;
          const inRange = f >= entity.visible[0] && f <= entity.visible[1];
          const inBounds = x >= 0 && x <= info.width && y >= 0 && y <= info.height;
          samples.push({
            x: inBounds ? x : Math.min(Math.max(x, 0), info.width),
            y: inBounds ? y : Math.min(Math.max(y, 0), info.height),
            visible: inRange && inBounds,
          });
        }
        return samples;
      });
      out.push({ entity: label, points });
    }
    return out;
  }

  async depthFrame(videoPath: string, info: VideoInfo, frame: number): Promise<Float32Array> {
    const scene = loadScene(videoPath);
    const near = scene.depth?.near ?? 2.0;
    const slopeY = scene.depth?.slope_y ?? 0.01;
    const drift = scene.depth?.drift ?? 0.0;
    const values = new Float32Array(info.width * info.height);
    for (let y = 0; y < info.height; y++) {
      for (let x = 0; x < info.width; x++) {
        values[y * info.width + x] = near + slopeY * y + drift * frame;
      }
    }
    for (const [x1, y1, x2, y2, f1, f2] of scene.depth?.holes ?? []) {
      if (frame < f1 || frame > f2) continue;
      for (let y = Math.max(0, y1); y < Math.min(info.height, y2); y++) {
        for (let x = Math.max(0, x1); x < Math.min(info.width, x2); x++) {
          values[y * info.width + x] = 0.0; // invalid depth
        }
      }
    }
    return values;
  }
}
