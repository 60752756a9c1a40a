#!/usr/bin/env node
// Minimal SMT-LIB2 pipe around the z3 WebAssembly build: reads a script
// from stdin, evaluates it, writes the solver output to stdout.  Install
// the dependency with `npm install` in this directory (see package.json).
"use strict";

const { init } = require("z3-solver");

async function main() {
  const chunks = [];
  for await (const chunk of process.stdin) chunks.push(chunk);
  const script = Buffer.concat(chunks).toString("utf8");
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);
  const out = await Z3.eval_smtlib2_string(ctx, script);
  process.stdout.write(out.endsWith("\n") || out === "" ? out : out + "\n");
  process.exit(0);
}

main().catch((err) => {
  process.stderr.write(String(err) + "\n");
  process.exit(1);
});
