import { ReviewApi } from './api.js';
import { mount } from './ui.js';

const root = document.getElementById('app');
if (!root) throw new Error('missing #app mount point');

const controller = mount(root, new ReviewApi(''));

function openFromHash(): void {
  const match = window.location.hash.match(/^#\/sessions\/([A-Za-z0-9]+)/);
  if (match) void controller.openSession(match[1]);
}

window.addEventListener('hashchange', openFromHash);
openFromHash();
