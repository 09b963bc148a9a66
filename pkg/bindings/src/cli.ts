import { spawnSync } from "node:child_process";

/** The command used to reach the native core; override with NUDGE_CLI. */
export function cliCommand(): string {
  return process.env.NUDGE_CLI ?? "nudge";
}

/** Run one CLI invocation, returning stdout or throwing its error message. */
export function runCli(args: string[]): string {
  const command = cliCommand();
  const run = spawnSync(command, args, { encoding: "utf8", maxBuffer: 256 * 1024 * 1024 });
  if (run.error) {
    throw new Error(`could not run ${command}: ${run.error.message}`);
  }
  if (run.status !== 0) {
    throw new Error(cliErrorMessage(run.stderr ?? "", run.status ?? -1));
  }
  return run.stdout ?? "";
}

// The CLI reports failures as a final "Error: <message>" stderr line; usage
// errors prepend usage text that has no place in a thrown Error.
function cliErrorMessage(stderr: string, status: number): string {
  const lines = stderr.trim().split("\n");
  for (let i = lines.length - 1; i >= 0; i--) {
    if (lines[i].startsWith("Error: ")) {
      return lines[i].slice("Error: ".length);
    }
  }
  const text = stderr.trim();
  return text === "" ? `command exited with status ${status}` : text;
}
