/**
 * CLI: `node dist/main.js <checkpoint-source> <out.vggw> <out-golden.vggw>`
 *
 * The checkpoint source is either an existing .vggw file or a directory
 * holding layers.json plus raw float32 .bin files.
 */

import { writeFileSync } from "node:fs";

import { CheckpointError, exportAll } from "./export.js";
import { VggwFormatError } from "./vggw.js";

function main(argv: string[]): number {
  if (argv.length !== 3) {
    console.error(
      "usage: main.js <checkpoint-source> <out.vggw> <out-golden.vggw>",
    );
    return 1;
  }
  const [source, outWeights, outGolden] = argv;
  try {
    const { weights, golden } = exportAll(source);
    writeFileSync(outWeights, weights);
    writeFileSync(outGolden, golden);
    console.log(`wrote ${outWeights} (${weights.length} bytes)`);
    console.log(`wrote ${outGolden} (${golden.length} bytes)`);
    return 0;
  } catch (err) {
    if (err instanceof CheckpointError || err instanceof VggwFormatError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

process.exit(main(process.argv.slice(2)));
