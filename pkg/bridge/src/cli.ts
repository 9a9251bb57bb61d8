/** Thin job runner: `bridge run --job job.json`. One job per process. */

import { readFileSync } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { jobSchema, runJob } from "./jobs.js";

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .command("run", "run a bridge job", (y) =>
      y.option("job", { type: "string", demandOption: true }))
    .demandCommand(1)
    .strict()
    .parse();
  const raw = JSON.parse(readFileSync(args.job as string, "utf8"));
  const job = jobSchema.parse(raw);
  const summary = await runJob(job);
  console.log(JSON.stringify(summary));
  return 0;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.ts") || entry.endsWith("cli.js")) {
  main(hideBin(process.argv)).then(
    (code) => process.exit(code),
    (err) => {
      console.error(`error: ${err.message}`);
      process.exit(1);
    },
  );
}
