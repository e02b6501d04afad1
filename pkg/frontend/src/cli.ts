/** Command-line entry for the CNN harness. */

import * as yargs from "yargs";

import { datasetSummary, TRAIN_DEFAULTS, trainEval } from "./train";
import { LabelMode } from "./data";

export function run(argv: string[]): Promise<unknown> {
  return yargs
    .scriptName("xtinct-cnn")
    .command(
      "train",
      "Train the 1-D CNN on dataset artifacts and write a metrics report",
      (y) =>
        y
          .option("train", { type: "string", demandOption: true })
          .option("test", { type: "string", demandOption: true })
          .option("label-mode", {
            choices: ["space-group", "extinction-class"] as const,
            default: "space-group" as LabelMode,
          })
          .option("class-report", {
            type: "string",
            describe: "class report JSON (required for extinction-class labels)",
          })
          .option("report", { type: "string", describe: "output report path" })
          .option("epochs", { type: "number", default: TRAIN_DEFAULTS.epochs })
          .option("batch-size", { type: "number", default: TRAIN_DEFAULTS.batchSize })
          .option("learning-rate", {
            type: "number",
            default: TRAIN_DEFAULTS.learningRate,
          })
          .option("seed", { type: "number", default: TRAIN_DEFAULTS.seed })
          .option("patience", { type: "number", default: TRAIN_DEFAULTS.patience }),
      async (args) => {
        if (args.labelMode === "extinction-class" && !args.classReport) {
          throw new Error("--class-report is required with extinction-class labels");
        }
        const report = await trainEval({
          trainPath: args.train,
          testPath: args.test,
          labelMode: args.labelMode as LabelMode,
          classReport: args.classReport,
          epochs: args.epochs,
          batchSize: args.batchSize,
          learningRate: args.learningRate,
          lrDropEpochs: TRAIN_DEFAULTS.lrDropEpochs,
          lrDecay: TRAIN_DEFAULTS.lrDecay,
          seed: args.seed,
          patience: args.patience,
          reportPath: args.report,
        });
        const acc = report.topk_accuracy;
        process.stdout.write(
          "top-1..5: " +
            Object.keys(acc)
              .sort()
              .map((k) => `${(100 * acc[k]).toFixed(1)}%`)
              .join(" ") +
            "\n"
        );
      }
    )
    .command(
      "inspect <dataset>",
      "Print header information for a dataset artifact",
      (y) => y.positional("dataset", { type: "string", demandOption: true }),
      (args) => {
        process.stdout.write(
          JSON.stringify(datasetSummary(args.dataset as string), null, 2) + "\n"
        );
      }
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      process.stderr.write(`error: ${msg ?? err?.message}\n`);
      process.exit(2);
    })
    .parseAsync(argv);
}

if (require.main === module) {
  run(process.argv.slice(2)).catch((err) => {
    process.stderr.write(`error: ${err?.message ?? err}\n`);
    process.exit(1);
  });
}
