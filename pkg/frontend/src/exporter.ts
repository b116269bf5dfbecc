/** Export job orchestration: images -> feature files + manifests.
 *
 * The job JSON names an images CSV (image_path,dataset_id,sample_id,
 * content_id,mos_raw), per-dataset descriptor fields, and the split. Train
 * exports resize the short side to 512 and cut N seeded 384x384 crops per
 * image (each crop becomes one manifest row); test exports resize to 768
 * and emit one feature file per image, uncropped. Unreadable images are
 * skipped with a log line; an export with zero successful rows fails.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { Backbone, flattenSpatial, loadBackbone, seededBackbone } from "./backbone.js";
import { Image, crop, decodePnm, resizeShortSide } from "./image.js";
import { writeFeatureFileAtomic } from "./featfile.js";
import { Rng, childSeed } from "./rng.js";

export const TRAIN_SHORT_SIDE = 512;
export const TEST_SHORT_SIDE = 768;
export const CROP_SIZE = 384;

export class JobError extends Error {}

export interface DatasetInfo {
  native_min: number;
  native_max: number;
  higher_is_better: boolean;
}

export interface ExportJob {
  imagesCsv: string;
  outDir: string;
  split: "train" | "test";
  seed: number;
  cropsPerImage: number;
  shortSide: number;
  cropSize: number | null;
  backboneWeights: string | null;
  datasets: Record<string, DatasetInfo>;
}

export interface ImageRow {
  imagePath: string;
  datasetId: string;
  sampleId: string;
  contentId: string;
  mosRaw: string; // kept verbatim for byte-stable manifests
}

export function loadJob(jobPath: string): ExportJob {
  let doc: any;
  try {
    doc = JSON.parse(fs.readFileSync(jobPath, "utf-8"));
  } catch (e) {
    throw new JobError(`cannot read job file ${jobPath}: ${e}`);
  }
  const known = new Set([
    "images_csv", "out_dir", "split", "seed", "crops_per_image",
    "resize_short_side", "crop_size", "backbone_weights", "datasets",
  ]);
  for (const key of Object.keys(doc)) {
    if (!known.has(key)) throw new JobError(`unknown job key ${JSON.stringify(key)}`);
  }
  const split = doc.split ?? "train";
  if (split !== "train" && split !== "test") {
    throw new JobError(`split must be "train" or "test", got ${JSON.stringify(split)}`);
  }
  if (!doc.images_csv || !doc.out_dir) throw new JobError("job needs images_csv and out_dir");
  if (!doc.datasets || Object.keys(doc.datasets).length === 0) {
    throw new JobError("job needs a datasets section with descriptor fields");
  }
  for (const [ds, info] of Object.entries<any>(doc.datasets)) {
    if (
      typeof info.native_min !== "number" ||
      typeof info.native_max !== "number" ||
      info.native_min >= info.native_max ||
      typeof info.higher_is_better !== "boolean"
    ) {
      throw new JobError(`dataset ${ds}: bad descriptor fields`);
    }
  }
  const shortSide = doc.resize_short_side ?? (split === "train" ? TRAIN_SHORT_SIDE : TEST_SHORT_SIDE);
  const cropSize = split === "train" ? doc.crop_size ?? CROP_SIZE : null;
  if (cropSize !== null && cropSize > shortSide) {
    throw new JobError(`crop size ${cropSize} exceeds the resized short side ${shortSide}`);
  }
  return {
    imagesCsv: doc.images_csv,
    outDir: doc.out_dir,
    split,
    seed: doc.seed ?? 0,
    cropsPerImage: doc.crops_per_image ?? 4,
    shortSide,
    cropSize,
    backboneWeights: doc.backbone_weights ?? null,
    datasets: doc.datasets,
  };
}

export function readImagesCsv(csvPath: string, job: ExportJob): ImageRow[] {
  let text: string;
  try {
    text = fs.readFileSync(csvPath, "utf-8");
  } catch (e) {
    throw new JobError(`cannot read images csv ${csvPath}: ${e}`);
  }
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  const header = "image_path,dataset_id,sample_id,content_id,mos_raw";
  if (lines[0].trim() !== header) {
    throw new JobError(`images csv header must be "${header}"`);
  }
  const rows: ImageRow[] = [];
  for (const line of lines.slice(1)) {
    const parts = line.split(",");
    if (parts.length !== 5) throw new JobError(`bad csv row: ${line}`);
    const [imagePath, datasetId, sampleId, contentId, mosRaw] = parts.map((p) => p.trim());
    if (!(datasetId in job.datasets)) {
      throw new JobError(`row ${sampleId}: dataset ${datasetId} missing from the job's datasets`);
    }
    if (!contentId) throw new JobError(`row ${sampleId}: empty content_id`);
    rows.push({ imagePath, datasetId, sampleId, contentId, mosRaw });
  }
  return rows;
}

export interface ManifestRow {
  datasetId: string;
  sampleId: string;
  contentId: string;
  featurePath: string;
  mosRaw: string;
}

export interface ExportResult {
  rows: ManifestRow[];
  skipped: string[];
}

export function runExport(job: ExportJob, log: (msg: string) => void = console.error): ExportResult {
  const backbone: Backbone = job.backboneWeights
    ? loadBackbone(job.backboneWeights)
    : seededBackbone(childSeed(job.seed, "backbone"));
  const images = readImagesCsv(job.imagesCsv, job);
  const rows: ManifestRow[] = [];
  const skipped: string[] = [];

  for (const row of images) {
    let img: Image;
    try {
      img = decodePnm(fs.readFileSync(row.imagePath));
    } catch (e) {
      log(`skipping ${row.sampleId}: unreadable image ${row.imagePath} (${e})`);
      skipped.push(row.sampleId);
      continue;
    }
    const resized = resizeShortSide(img, job.shortSide);
    const variants: { suffix: string; view: Image }[] = [];
    if (job.cropSize === null) {
      variants.push({ suffix: "", view: resized });
    } else {
      const rng = new Rng(childSeed(job.seed, row.datasetId, row.sampleId, "crops"));
      for (let k = 0; k < job.cropsPerImage; k++) {
        const left = rng.nextInt(resized.width - job.cropSize + 1);
        const top = rng.nextInt(resized.height - job.cropSize + 1);
        variants.push({ suffix: `.c${k}`, view: crop(resized, left, top, job.cropSize) });
      }
    }
    for (const { suffix, view } of variants) {
      const fm = backbone.forward(view.data, view.height, view.width);
      const { c, l, data } = flattenSpatial(fm);
      const sampleId = row.sampleId + suffix;
      const rel = path.join(row.datasetId, "features", `${sampleId}.mqaf`);
      writeFeatureFileAtomic(path.join(job.outDir, rel), c, l, data);
      rows.push({
        datasetId: row.datasetId,
        sampleId,
        contentId: row.contentId,
        featurePath: rel.split(path.sep).join("/"),
        mosRaw: row.mosRaw,
      });
    }
  }
  if (rows.length === 0) {
    throw new JobError("export produced zero rows (every image failed)");
  }
  writeManifests(job, rows);
  return { rows, skipped };
}

function writeManifests(job: ExportJob, rows: ManifestRow[]): void {
  const byDataset = new Map<string, ManifestRow[]>();
  for (const row of rows) {
    const list = byDataset.get(row.datasetId) ?? [];
    list.push(row);
    byDataset.set(row.datasetId, list);
  }
  for (const [ds, list] of [...byDataset.entries()].sort()) {
    const dir = path.join(job.outDir, ds);
    fs.mkdirSync(dir, { recursive: true });
    const info = job.datasets[ds];
    const descriptor = {
      dataset_id: ds,
      higher_is_better: info.higher_is_better,
      native_max: info.native_max,
      native_min: info.native_min,
    };
    fs.writeFileSync(path.join(dir, "descriptor.json"), JSON.stringify(descriptor) + "\n");
    const lines = ["sample_id,content_id,feature_path,mos_raw"];
    for (const row of list) {
      lines.push(`${row.sampleId},${row.contentId},${row.featurePath},${row.mosRaw}`);
    }
    fs.writeFileSync(path.join(dir, "manifest.csv"), lines.join("\n") + "\n");
  }
}
