export {
  BadRequestError,
  RewardClient,
  ServiceUnavailableError,
  type RewardClientOptions,
  type ScoreItem,
  type ScoreResult,
} from "./client.js";
export { JsonlParseError, readJsonl, writeJsonl } from "./jsonl.js";
