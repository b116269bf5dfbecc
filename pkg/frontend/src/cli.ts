/** CLI: `node dist/cli.js --job job.json` runs one export job. */

import { JobError, loadJob, runExport } from "./exporter.js";

function main(argv: string[]): number {
  const args = argv.slice(2);
  let jobPath: string | null = null;
  for (let i = 0; i < args.length; i++) {
    if (args[i] === "--job") jobPath = args[++i];
    else if (args[i] === "--help" || args[i] === "-h") {
      console.log("usage: cli --job <job.json>");
      console.log("job keys: images_csv, out_dir, split (train|test), seed (default 0),");
      console.log("  crops_per_image (default 4), resize_short_side (default 512 train / 768 test),");
      console.log("  crop_size (default 384, train only), backbone_weights (optional), datasets");
      return 0;
    } else {
      console.error(`unknown argument ${args[i]}`);
      return 2;
    }
  }
  if (!jobPath) {
    console.error("missing --job <job.json>");
    return 2;
  }
  try {
    const job = loadJob(jobPath);
    const result = runExport(job);
    console.log(
      `exported ${result.rows.length} rows to ${job.outDir}` +
        (result.skipped.length ? ` (skipped ${result.skipped.length})` : ""),
    );
    return 0;
  } catch (e) {
    if (e instanceof JobError) {
      console.error(`job error: ${e.message}`);
      return 2;
    }
    console.error(`export failed: ${e}`);
    return 1;
  }
}

process.exit(main(process.argv));
