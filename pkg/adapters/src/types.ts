/** Shared shapes for the perception adapters and their backends. */

export interface VideoInfo {
  videoId: string;
  width: number;
  height: number;
  fps: number;
  frameCount: number;
}

/** One detection row, mirroring the engine's detections.jsonl record. */
export interface DetectionRow {
  frame: number;
  entity: string;
  bbox: [number, number, number, number];
  score: number;
}

/** Axis-aligned region used to constrain track seed sampling. */
export interface MaskRegion {
  entity: string;
  frame: number;
  rect: [number, number, number, number];
}

export interface SeedPoint {
  entity: string;
  x: number;
  y: number;
  frame: number;
}

/** Dense per-frame position of one tracked point. */
export interface TrackPointSample {
  x: number;
  y: number;
  visible: boolean;
}

export interface EntityTracks {
  entity: string;
  /** points[p][f] = sample of point p at frame f; dense over all frames. */
  points: TrackPointSample[][];
}

export interface AdapterJob {
  videoPath: string;
  /** Entity queries from QA records; empty means detect-all mode. */
  queries: string[];
  outDir: string;
  seedStride: number;
}

/**
 * A perception model stack (detector, mask generator, point tracker, depth
 * estimator) behind one interface. Real deployments talk to model servers
 * over HTTP; the synthetic backend replays scripted scenes for smoke tests.
 */
export interface PerceptionBackend {
  readonly name: string;
  probeVideo(videoPath: string): Promise<VideoInfo>;
  detect(videoPath: string, info: VideoInfo, queries: string[]): Promise<DetectionRow[]>;
  maskRegions(videoPath: string, info: VideoInfo, detections: DetectionRow[]): Promise<MaskRegion[]>;
  trackPoints(videoPath: string, info: VideoInfo, seeds: SeedPoint[]): Promise<EntityTracks[]>;
  depthFrame(videoPath: string, info: VideoInfo, frame: number): Promise<Float32Array>;
}
